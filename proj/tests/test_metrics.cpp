#include <doctest.h>

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "atd/errors.hpp"
#include "atd/metrics.hpp"
#include "atd/rng.hpp"

using namespace atd;
using namespace atd::evalkit;
using nlohmann::json;

#ifndef ATD_FIXTURE_DIR
#define ATD_FIXTURE_DIR "tests/fixtures"
#endif

namespace {

json load_fixture() {
  std::ifstream in(std::string(ATD_FIXTURE_DIR) + "/metric_cases.json");
  REQUIRE(in.good());
  return json::parse(in);
}

// Quadratic reference for the three monitors, written independently of the
// library implementation.
Monitors brute_force_monitors(const RelevanceScores& reader,
                              const RelevanceScores& retriever, int k) {
  Monitors m;
  const auto& re = reader.entries;
  const auto& se = retriever.entries;
  for (size_t i = 0; i < re.size(); ++i)
    for (size_t j = 0; j < re.size(); ++j) {
      if (i >= j) continue;
      const double a = re[i].second - re[j].second;
      const double b = se[i].second - se[j].second;
      if (a > 0 && b < 0) ++m.inversions;
      if (a < 0 && b > 0) ++m.inversions;
    }
  auto rank = [](const RelevanceScores& s) {
    std::vector<std::pair<std::string, double>> v = s.entries;
    std::stable_sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    std::vector<std::string> pids;
    for (auto& [p, sc] : v) pids.push_back(p);
    return pids;
  };
  const auto rr = rank(reader);
  const auto sr = rank(retriever);
  const int kk = std::min<int>(k, static_cast<int>(rr.size()));
  int inter = 0;
  for (int i = 0; i < kk; ++i)
    for (int j = 0; j < kk; ++j)
      if (rr[static_cast<size_t>(i)] == sr[static_cast<size_t>(j)]) ++inter;
  m.overlap = kk == 0 ? 0.0 : static_cast<double>(inter) / kk;
  for (int depth = kk; depth <= static_cast<int>(sr.size()); ++depth) {
    bool all = true;
    for (int i = 0; i < kk; ++i) {
      bool found = false;
      for (int j = 0; j < depth; ++j)
        if (rr[static_cast<size_t>(i)] == sr[static_cast<size_t>(j)])
          found = true;
      if (!found) all = false;
    }
    if (all) {
      m.coverage_depth = depth;
      break;
    }
  }
  return m;
}

} // namespace

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("The Eiffel Tower") == "eiffel tower");
  CHECK(normalize_answer("  A  big,  DOG! ") == "big dog");
  CHECK(normalize_answer("an") == "");
  CHECK(normalize_answer("theater") == "theater");
  CHECK(normalize_answer("U.S.A.") == "u s"); // standalone "a" is an article
}

TEST_CASE("exact match spec cases") {
  CHECK(exact_match("The Eiffel Tower", {"eiffel tower"}) == 1);
  CHECK(exact_match("", {"anything"}) == 0);
  CHECK(exact_match("London, England", {"London"}) == 0);
  CHECK_THROWS_AS(exact_match("x", {}), ArgumentError);
}

TEST_CASE("exact match is symmetric under normalization") {
  Rng rng(3);
  const std::vector<std::string> samples = {
      "The Cat", "cat", "a dog!", "DOG", "Paris, France", "paris france",
      "42", "42.", "x y", "x-y"};
  for (const std::string& a : samples)
    for (const std::string& b : samples)
      CHECK(exact_match(a, {b}) == exact_match(b, {a}));
}

TEST_CASE("metric fixtures match hand labels exactly") {
  const json fixture = load_fixture();
  size_t n_cases = 0;

  for (const auto& c : fixture.at("em_cases")) {
    ++n_cases;
    const int got = exact_match(c.at("prediction").get<std::string>(),
                                c.at("golds").get<std::vector<std::string>>());
    CAPTURE(c.at("prediction").get<std::string>());
    CHECK(got == c.at("expected").get<int>());
  }

  for (const auto& c : fixture.at("patk_cases")) {
    ++n_cases;
    datakit::Corpus corpus;
    for (const auto& p : c.at("passages"))
      corpus.add({p.at(0).get<std::string>(), "", p.at(1).get<std::string>()});
    const bool got = hit_in_topk(
        c.at("retrieved").get<std::vector<std::string>>(),
        c.at("golds").get<std::vector<std::string>>(), corpus,
        c.at("k").get<int>());
    CAPTURE(c.at("name").get<std::string>());
    CHECK(got == c.at("hit").get<bool>());
  }

  CHECK(n_cases == 50);
}

TEST_CASE("hit at k implies hit at k+1") {
  datakit::Corpus corpus;
  corpus.add({"p1", "", "alpha"});
  corpus.add({"p2", "", "the Paris answer"});
  corpus.add({"p3", "", "gamma"});
  const std::vector<std::string> retrieved = {"p1", "p2", "p3"};
  bool prev = false;
  for (int k = 1; k <= 3; ++k) {
    const bool hit = hit_in_topk(retrieved, {"paris"}, corpus, k);
    if (prev) CHECK(hit);
    prev = hit;
  }
  CHECK(p_at_k({{retrieved, {"paris"}}}, corpus, 1) == 0.0);
  CHECK(p_at_k({{retrieved, {"paris"}}}, corpus, 2) == 1.0);
  CHECK_THROWS_AS(p_at_k({}, corpus, 0), ArgumentError);
}

TEST_CASE("ranking monitors on identical and reversed rankings") {
  RelevanceScores a;
  a.qid = "q";
  RelevanceScores b;
  b.qid = "q";
  const int n = 8;
  for (int i = 0; i < n; ++i) {
    const std::string pid = "p" + std::to_string(i);
    a.add(pid, static_cast<double>(i));
    b.add(pid, static_cast<double>(i));
  }
  Monitors same = ranking_monitors(a, b, 3);
  CHECK(same.inversions == 0);
  CHECK(same.overlap == 1.0);
  CHECK(same.coverage_depth == 3);

  RelevanceScores rev;
  rev.qid = "q";
  for (int i = 0; i < n; ++i)
    rev.add("p" + std::to_string(i), static_cast<double>(-i));
  Monitors opp = ranking_monitors(a, rev, 3);
  CHECK(opp.inversions == n * (n - 1) / 2);
  CHECK(opp.overlap == 0.0);
  CHECK(opp.coverage_depth == n);
}

TEST_CASE("monitors match a quadratic brute-force oracle on random instances") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(16)); // up to 20
    RelevanceScores reader, retriever;
    reader.qid = retriever.qid = "q";
    for (int i = 0; i < n; ++i) {
      const std::string pid = "p" + std::to_string(i);
      // quantized scores produce plenty of ties
      reader.add(pid, std::floor(rng.uniform() * 6.0));
      retriever.add(pid, std::floor(rng.uniform() * 6.0));
    }
    const int k = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    Monitors got = ranking_monitors(reader, retriever, k);
    Monitors expected = brute_force_monitors(reader, retriever, k);
    CHECK(got.inversions == expected.inversions);
    CHECK(got.overlap == doctest::Approx(expected.overlap));
    CHECK(got.coverage_depth == expected.coverage_depth);
  }
}

TEST_CASE("monitors reject mismatched id sets") {
  RelevanceScores a, b;
  a.qid = b.qid = "q";
  a.add("p1", 1.0);
  b.add("p2", 1.0);
  CHECK_THROWS_AS(ranking_monitors(a, b, 1), DataError);
}

TEST_CASE("zero inversions iff non-tied pairs agree") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_int(8));
    RelevanceScores a, b;
    a.qid = b.qid = "q";
    for (int i = 0; i < n; ++i) {
      const std::string pid = "p" + std::to_string(i);
      a.add(pid, std::floor(rng.uniform() * 4.0));
      b.add(pid, std::floor(rng.uniform() * 4.0));
    }
    Monitors m = ranking_monitors(a, b, 1);
    bool agree = true;
    for (size_t i = 0; i < a.entries.size(); ++i)
      for (size_t j = i + 1; j < a.entries.size(); ++j) {
        const double da = a.entries[i].second - a.entries[j].second;
        const double db = b.entries[i].second - b.entries[j].second;
        if (da != 0.0 && db != 0.0 && (da > 0) != (db > 0)) agree = false;
      }
    CHECK((m.inversions == 0) == agree);
  }
}

TEST_CASE("kendall tau endpoints") {
  RelevanceScores a, b, c;
  a.qid = b.qid = c.qid = "q";
  for (int i = 0; i < 6; ++i) {
    const std::string pid = "p" + std::to_string(i);
    a.add(pid, i);
    b.add(pid, i * 2.0 + 1.0);
    c.add(pid, -i);
  }
  CHECK(kendall_tau(a, b) == 1.0);
  CHECK(kendall_tau(a, c) == -1.0);
}
