#include <doctest.h>

#include <filesystem>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "atd/data.hpp"
#include "atd/io_util.hpp"
#include "atd/tokenizer.hpp"
#include "atd/worldgen.hpp"

using namespace atd;
using namespace atd::datakit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("tokenize basics") {
  CHECK(tokenize("", 1024).empty());
  CHECK(tokenize("Hello, WORLD!", 1024) == tokenize("hello world", 1024));
  // stability across calls (and by construction across processes: pure FNV)
  CHECK(tokenize("the quick brown fox", 32768) ==
        tokenize("the quick brown fox", 32768));
  for (int32_t id : tokenize("some words here", 512)) {
    CHECK(id >= kReservedCount);
    CHECK(id < 512);
  }
  CHECK_THROWS_AS(tokenize("x", kReservedCount), ArgumentError);
}

TEST_CASE("tokenizer pairwise collision rate over 10k words stays under 5%") {
  // words w0..w9999; collision rate measured as the fraction of distinct
  // word pairs mapping to the same id
  const int vocab = 32768;
  std::unordered_map<int32_t, long long> bucket;
  const long long n = 10000;
  for (long long i = 0; i < n; ++i)
    ++bucket[hash_token_id("w" + std::to_string(i), vocab)];
  long long colliding_pairs = 0;
  for (const auto& [id, c] : bucket) colliding_pairs += c * (c - 1) / 2;
  const double rate = static_cast<double>(colliding_pairs) /
                      (static_cast<double>(n) * (n - 1) / 2.0);
  CHECK(rate <= 0.05);
}

TEST_CASE("lexicon picks the lexicographically smallest word per id") {
  Lexicon lex(4096);
  lex.observe_text("zebra apple");
  const int32_t za = hash_token_id("zebra", 4096);
  CHECK(lex.word_for(za) == "zebra");
  CHECK(lex.detokenize({kBosId, za, kEosId}) == "zebra");
  CHECK_NOTHROW(lex.word_for(kReservedCount + 1)); // unseen id is fine
}

TEST_CASE("assemble_input layout and markers") {
  const int vocab = 2048;
  Passage p{"p1", "some title", "body words go here"};
  TokenSeq seq = assemble_input("what is it", p, vocab, 64);

  CHECK(seq[0] == kQuestionMarkId);
  CHECK(std::count(seq.begin(), seq.end(), kTitleMarkId) == 1);
  CHECK(std::count(seq.begin(), seq.end(), kContextMarkId) == 1);

  // markers are distinct reserved ids below the hash range
  std::set<int32_t> markers{kQuestionMarkId, kTitleMarkId, kContextMarkId};
  CHECK(markers.size() == 3);
  for (int32_t m : markers) CHECK(m < kReservedCount);

  // empty passage text keeps all three markers
  Passage empty{"p2", "title", ""};
  TokenSeq seq2 = assemble_input("q words", empty, vocab, 64);
  CHECK(std::count(seq2.begin(), seq2.end(), kQuestionMarkId) == 1);
  CHECK(std::count(seq2.begin(), seq2.end(), kTitleMarkId) == 1);
  CHECK(std::count(seq2.begin(), seq2.end(), kContextMarkId) == 1);

  // determinism
  CHECK(assemble_input("what is it", p, vocab, 64) == seq);

  // tail truncation: the question prefix survives, passage tail is dropped
  TokenSeq full = assemble_input("what is it", p, vocab, 1000);
  for (int cap = 5; cap < static_cast<int>(full.size()); ++cap) {
    TokenSeq cut = assemble_input("what is it", p, vocab, cap);
    CHECK(static_cast<int>(cut.size()) == cap);
    CHECK(std::equal(cut.begin(), cut.end(), full.begin()));
  }
}

TEST_CASE("corpus and example round-trips") {
  Corpus corpus;
  corpus.add({"p0", "t0", "first text"});
  corpus.add({"p1", "t\"1", "second \n text"});
  CHECK_THROWS_AS(corpus.add({"p0", "", ""}), DataError);

  const std::string cpath = temp_path("atd_test_corpus.jsonl");
  save_corpus(cpath, corpus);
  Corpus loaded = load_corpus(cpath);
  REQUIRE(loaded.size() == 2);
  for (size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded.passages()[i].pid == corpus.passages()[i].pid);
    CHECK(loaded.passages()[i].title == corpus.passages()[i].title);
    CHECK(loaded.passages()[i].text == corpus.passages()[i].text);
  }

  std::vector<QaExample> examples{
      {"q0", "who?", {"answer one", "two"}, {"p0", "p1"}},
      {"q1", "what?", {"x"}, {}},
  };
  const std::string epath = temp_path("atd_test_examples.jsonl");
  save_examples(epath, examples);
  auto loaded_ex = load_examples(epath);
  REQUIRE(loaded_ex.size() == 2);
  CHECK(loaded_ex[0].qid == "q0");
  CHECK(loaded_ex[0].answers == examples[0].answers);
  CHECK(loaded_ex[0].support == examples[0].support);
  CHECK(loaded_ex[1].support.empty());

  std::filesystem::remove(cpath);
  std::filesystem::remove(epath);
}

TEST_CASE("gen_world validates parameters") {
  WorldConfig cfg;
  cfg.n_passages = 10;
  cfg.n_questions = 4;
  cfg.relevant_per_q = 3; // 12 > 10
  CHECK_THROWS_AS(gen_world(cfg), ArgumentError);
  cfg.relevant_per_q = 0;
  CHECK_THROWS_AS(gen_world(cfg), ArgumentError);
  cfg.relevant_per_q = 1;
  cfg.leak = 1.0;
  CHECK_THROWS_AS(gen_world(cfg), ArgumentError);
}

TEST_CASE("gen_world is deterministic and plants answers") {
  WorldConfig cfg;
  cfg.seed = 42;
  cfg.n_passages = 60;
  cfg.n_questions = 10;
  cfg.relevant_per_q = 3;
  cfg.passage_len = 18;
  cfg.leak = 0.1;

  SyntheticWorld w1 = gen_world(cfg);
  SyntheticWorld w2 = gen_world(cfg);

  const std::string pa = temp_path("atd_world_a.jsonl");
  const std::string pb = temp_path("atd_world_b.jsonl");
  save_corpus(pa, w1.corpus);
  save_corpus(pb, w2.corpus);
  CHECK(read_file(pa) == read_file(pb));
  std::filesystem::remove(pa);
  std::filesystem::remove(pb);

  CHECK(w1.corpus.size() == 60);
  CHECK(w1.train.size() + w1.val.size() == 10);

  // every ground-truth-relevant passage contains the planted answer
  std::vector<QaExample> all(w1.train);
  all.insert(all.end(), w1.val.begin(), w1.val.end());
  for (const QaExample& ex : all) {
    const GroundTruth& gt = truth_for(w1.truth, ex.qid);
    CHECK(gt.relevant.size() == 3);
    double prev = 1e300;
    for (const auto& [pid, grade] : gt.relevant) {
      CHECK(grade < prev);
      prev = grade;
      CHECK(w1.corpus.at(pid).text.find(ex.answers[0]) != std::string::npos);
    }
  }

  // leak stays within the configured fraction of irrelevant passages
  for (const QaExample& ex : all) {
    const GroundTruth& gt = truth_for(w1.truth, ex.qid);
    std::unordered_set<std::string> rel;
    for (const auto& [pid, grade] : gt.relevant) rel.insert(pid);
    int leaked = 0;
    for (const Passage& p : w1.corpus.passages()) {
      if (rel.count(p.pid)) continue;
      if (p.text.find(ex.answers[0]) != std::string::npos) ++leaked;
    }
    CHECK(leaked <= static_cast<int>(cfg.leak * (60 - 3)));
  }
}

TEST_CASE("gen_world ground truth is recoverable at leak zero") {
  WorldConfig cfg;
  cfg.seed = 7;
  cfg.n_passages = 80;
  cfg.n_questions = 12;
  cfg.relevant_per_q = 4;
  cfg.leak = 0.0;
  SyntheticWorld w = gen_world(cfg);

  // the ground-truth ranking itself achieves P@relevant_per_q == 1
  std::vector<QaExample> all(w.train);
  all.insert(all.end(), w.val.begin(), w.val.end());
  for (const QaExample& ex : all) {
    const GroundTruth& gt = truth_for(w.truth, ex.qid);
    bool hit = false;
    for (const auto& [pid, grade] : gt.relevant)
      if (w.corpus.at(pid).text.find(ex.answers[0]) != std::string::npos)
        hit = true;
    CHECK(hit);
  }
}

TEST_CASE("fill_support modes") {
  WorldConfig cfg;
  cfg.seed = 11;
  cfg.n_passages = 50;
  cfg.n_questions = 6;
  cfg.relevant_per_q = 3;
  SyntheticWorld w = gen_world(cfg);

  auto count_relevant = [&](const QaExample& ex) {
    const GroundTruth& gt = truth_for(w.truth, ex.qid);
    int n = 0;
    for (const auto& [pid, grade] : gt.relevant)
      if (std::find(ex.support.begin(), ex.support.end(), pid) !=
          ex.support.end())
        ++n;
    return n;
  };

  Rng rng(3);
  std::vector<QaExample> oracle = w.train;
  fill_support(oracle, w.truth, w.corpus, InitMode::oracle, 10, 0.1, rng);
  for (const QaExample& ex : oracle) {
    CHECK(ex.support.size() == 10);
    CHECK(count_relevant(ex) == 3);
  }

  std::vector<QaExample> weak = w.train;
  fill_support(weak, w.truth, w.corpus, InitMode::planted_weak, 10, 0.1, rng);
  for (const QaExample& ex : weak) CHECK(count_relevant(ex) == 1);

  // supports never repeat a pid
  for (const QaExample& ex : weak) {
    std::unordered_set<std::string> uniq(ex.support.begin(), ex.support.end());
    CHECK(uniq.size() == ex.support.size());
  }

  CHECK_THROWS_AS(fill_support(weak, w.truth, w.corpus, InitMode::oracle, 0,
                               0.1, rng),
                  ArgumentError);
}

TEST_CASE("truth file round-trip") {
  std::vector<GroundTruth> truth{
      {"q0", {{"p1", 3.0}, {"p2", 2.0}}},
      {"q1", {{"p9", 1.0}}},
  };
  const std::string path = temp_path("atd_truth.jsonl");
  save_truth(path, truth);
  auto loaded = load_truth(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].relevant == truth[0].relevant);
  CHECK(loaded[1].relevant == truth[1].relevant);
  std::filesystem::remove(path);
}
