#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "atd/flat_index.hpp"
#include "atd/io_util.hpp"
#include "atd/rng.hpp"

using namespace atd;
using namespace atd::vecindex;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<std::pair<std::string, std::vector<float>>> random_rows(
    size_t n, uint32_t dim, Rng& rng) {
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  rows.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (float& x : v) x = static_cast<float>(rng.normal());
    rows.emplace_back("p" + std::to_string(i), std::move(v));
  }
  return rows;
}

// Independent oracle: exhaustive scan with the same (score desc, pid asc)
// order, implemented with a full sort instead of the index's running top-k.
std::vector<SearchHit> brute_force_topk(
    const std::vector<std::pair<std::string, std::vector<float>>>& rows,
    std::span<const double> query, int k) {
  std::vector<SearchHit> all;
  all.reserve(rows.size());
  for (const auto& [pid, vec] : rows) {
    double acc = 0.0;
    for (size_t c = 0; c < vec.size(); ++c)
      acc += static_cast<double>(vec[c]) * query[c];
    all.push_back({pid, acc});
  }
  std::sort(all.begin(), all.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pid < b.pid;
  });
  if (all.size() > static_cast<size_t>(k)) all.resize(static_cast<size_t>(k));
  return all;
}

} // namespace

TEST_CASE("empty index is valid and round-trips") {
  FlatIndex index = FlatIndex::build({}, 8);
  CHECK(index.count() == 0);
  const std::string path = temp_path("atd_idx_empty.atdx");
  index.save(path);
  FlatIndex loaded = FlatIndex::load(path);
  CHECK(loaded.count() == 0);
  CHECK(loaded.dim() == 8);
  std::vector<double> q(8, 1.0);
  CHECK(loaded.topk(q, 3).empty());
  std::filesystem::remove(path);
}

TEST_CASE("build validates input") {
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  rows.emplace_back("a", std::vector<float>{1.f, 2.f});
  rows.emplace_back("a", std::vector<float>{3.f, 4.f});
  CHECK_THROWS_AS(FlatIndex::build(rows, 2), DataError); // duplicate pid
  rows[1].first = "b";
  rows[1].second.resize(3);
  CHECK_THROWS_AS(FlatIndex::build(rows, 2), ArgumentError); // width mismatch
}

TEST_CASE("index round-trip preserves vectors byte-exactly") {
  Rng rng(17);
  auto rows = random_rows(100, 12, rng);
  FlatIndex index = FlatIndex::build(rows, 12);

  const std::string path = temp_path("atd_idx_rt.atdx");
  index.save(path);
  const std::string bytes1 = read_file(path);
  FlatIndex loaded = FlatIndex::load(path);
  const std::string path2 = temp_path("atd_idx_rt2.atdx");
  loaded.save(path2);
  CHECK(read_file(path2) == bytes1);

  for (size_t i = 0; i < rows.size(); ++i) {
    auto row = loaded.row(i);
    for (uint32_t c = 0; c < 12; ++c) CHECK(row[c] == rows[i].second[c]);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("stored bytes match an independent serializer") {
  Rng rng(23);
  auto rows = random_rows(1000, 8, rng);
  FlatIndex index = FlatIndex::build(rows, 8);
  const std::string path = temp_path("atd_idx_ser.atdx");
  index.save(path);

  std::string expected;
  expected += "ATDX";
  put_u32(expected, 1);
  put_u32(expected, 8);
  put_u64(expected, rows.size());
  for (const auto& [pid, vec] : rows)
    for (float v : vec) put_f32(expected, v);
  for (const auto& [pid, vec] : rows) {
    put_u32(expected, static_cast<uint32_t>(pid.size()));
    expected += pid;
  }
  CHECK(read_file(path) == expected);
  std::filesystem::remove(path);
}

TEST_CASE("basis vector query finds its row first") {
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  for (int i = 0; i < 4; ++i) {
    std::vector<float> v(4, 0.f);
    v[static_cast<size_t>(i)] = static_cast<float>(i + 1);
    rows.emplace_back("p" + std::to_string(i), std::move(v));
  }
  FlatIndex index = FlatIndex::build(rows, 4);
  std::vector<double> q = {0.0, 0.0, 3.0, 0.0}; // matches p2, norm^2 = 9
  auto hits = index.topk(q, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].pid == "p2");
  CHECK(hits[0].score == doctest::Approx(9.0));
}

TEST_CASE("k >= count returns the full ordering") {
  Rng rng(5);
  auto rows = random_rows(20, 6, rng);
  FlatIndex index = FlatIndex::build(rows, 6);
  std::vector<double> q(6);
  for (double& v : q) v = rng.normal();
  auto hits = index.topk(q, 100);
  CHECK(hits.size() == 20);
  auto oracle = brute_force_topk(rows, q, 100);
  for (size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].pid == oracle[i].pid);
    CHECK(hits[i].score == oracle[i].score);
  }
}

TEST_CASE("topk equals the brute-force oracle with exact tie order") {
  Rng rng(31);
  auto rows = random_rows(500, 16, rng);
  // plant exact ties: duplicate some vectors under different pids
  for (int i = 0; i < 10; ++i)
    rows.emplace_back("tie" + std::to_string(i), rows[static_cast<size_t>(i)].second);
  FlatIndex index = FlatIndex::build(rows, 16);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> q(16);
    for (double& v : q) v = rng.normal();
    const int k = 1 + static_cast<int>(rng.uniform_int(30));
    auto hits = index.topk(q, k);
    auto oracle = brute_force_topk(rows, q, k);
    REQUIRE(hits.size() == oracle.size());
    for (size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].pid == oracle[i].pid);
      CHECK(hits[i].score == oracle[i].score);
    }
  }
}

TEST_CASE("topk(k) is a prefix of topk(k+1) and scores are non-increasing") {
  Rng rng(13);
  auto rows = random_rows(200, 8, rng);
  FlatIndex index = FlatIndex::build(rows, 8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(8);
    for (double& v : q) v = rng.normal();
    const int k = 1 + static_cast<int>(rng.uniform_int(20));
    auto a = index.topk(q, k);
    auto b = index.topk(q, k + 1);
    REQUIRE(b.size() >= a.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].pid == b[i].pid);
    for (size_t i = 1; i < b.size(); ++i) CHECK(b[i - 1].score >= b[i].score);
  }
}

TEST_CASE("sharded search equals single shard") {
  Rng rng(41);
  auto rows = random_rows(333, 8, rng);
  FlatIndex index = FlatIndex::build(rows, 8);
  for (int shards : {2, 3, 7, 16, 400}) {
    std::vector<double> q(8);
    for (double& v : q) v = rng.normal();
    auto single = index.topk(q, 25, 1);
    auto sharded = index.topk(q, 25, shards);
    REQUIRE(single.size() == sharded.size());
    for (size_t i = 0; i < single.size(); ++i) {
      CHECK(single[i].pid == sharded[i].pid);
      CHECK(single[i].score == sharded[i].score);
    }
  }
}

TEST_CASE("topk argument errors") {
  FlatIndex index = FlatIndex::build({}, 4);
  std::vector<double> q(4, 0.0);
  CHECK_THROWS_AS(index.topk(q, 0), ArgumentError);
  CHECK_THROWS_AS(index.topk(std::vector<double>(3, 0.0), 1), ArgumentError);
  CHECK_THROWS_AS(index.topk(q, 1, 0), ArgumentError);
}
