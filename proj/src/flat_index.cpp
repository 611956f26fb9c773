#include "atd/flat_index.hpp"

#include <algorithm>
#include <unordered_set>

#include "atd/errors.hpp"
#include "atd/io_util.hpp"
#include "atd/parallel.hpp"

namespace atd::vecindex {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'D', 'X'};
constexpr uint32_t kVersion = 1;

// (score desc, pid asc); total order because pids are unique
bool hit_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.pid < b.pid;
}

std::vector<SearchHit> scan_range(const FlatIndex& index,
                                  std::span<const double> query, size_t k,
                                  uint64_t begin, uint64_t end) {
  // keep the k best seen so far; linear insertion is fine at these k
  std::vector<SearchHit> best;
  best.reserve(k + 1);
  const uint32_t dim = index.dim();
  for (uint64_t i = begin; i < end; ++i) {
    const float* row = index.row(i).data();
    double acc = 0.0;
    for (uint32_t c = 0; c < dim; ++c)
      acc += static_cast<double>(row[c]) * query[c];
    SearchHit hit{index.ids()[i], acc};
    if (best.size() == k && !hit_before(hit, best.back())) continue;
    auto pos = std::upper_bound(best.begin(), best.end(), hit, hit_before);
    best.insert(pos, std::move(hit));
    if (best.size() > k) best.pop_back();
  }
  return best;
}

} // namespace

FlatIndex FlatIndex::build(
    std::span<const std::pair<std::string, std::vector<float>>> rows,
    uint32_t dim) {
  if (dim == 0) throw ArgumentError("FlatIndex: dim must be > 0");
  FlatIndex index;
  index.dim_ = dim;
  index.rows_.reserve(rows.size() * dim);
  index.ids_.reserve(rows.size());
  std::unordered_set<std::string> seen;
  for (const auto& [pid, vec] : rows) {
    if (vec.size() != dim)
      throw ArgumentError("FlatIndex: vector for " + pid + " has width " +
                          std::to_string(vec.size()) + ", expected " +
                          std::to_string(dim));
    if (!seen.insert(pid).second)
      throw DataError("FlatIndex: duplicate passage id " + pid);
    index.rows_.insert(index.rows_.end(), vec.begin(), vec.end());
    index.ids_.push_back(pid);
  }
  return index;
}

void FlatIndex::save(const std::string& path) const {
  std::string blob;
  blob.reserve(24 + rows_.size() * 4);
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u32(blob, dim_);
  put_u64(blob, ids_.size());
  for (float v : rows_) put_f32(blob, v);
  for (const std::string& pid : ids_) {
    put_u32(blob, static_cast<uint32_t>(pid.size()));
    blob += pid;
  }
  write_file(path, blob);
}

FlatIndex FlatIndex::load(const std::string& path) {
  const std::string blob = read_file(path);
  ByteReader r(blob, path);
  if (r.take(4) != std::string_view(kMagic, 4))
    throw DataError("not an ATDX index: " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("unsupported ATDX version " + std::to_string(version) +
                    " in " + path);
  FlatIndex index;
  index.dim_ = r.u32();
  const uint64_t count = r.u64();
  index.rows_.resize(count * index.dim_);
  for (float& v : index.rows_) v = r.f32();
  index.ids_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t len = r.u32();
    index.ids_.emplace_back(r.take(len));
  }
  if (!r.done()) throw DataError("trailing bytes in ATDX index: " + path);
  return index;
}

std::vector<SearchHit> FlatIndex::topk(std::span<const double> query, int k,
                                       int shards) const {
  if (k < 1) throw ArgumentError("topk: k must be >= 1");
  if (query.size() != dim_)
    throw ArgumentError("topk: query width " + std::to_string(query.size()) +
                        " does not match index dim " + std::to_string(dim_));
  if (shards < 1) throw ArgumentError("topk: shards must be >= 1");
  const uint64_t n = count();
  const size_t keep = std::min<uint64_t>(static_cast<uint64_t>(k), n);
  if (keep == 0) return {};

  if (shards == 1 || static_cast<uint64_t>(shards) >= n)
    return scan_range(*this, query, keep, 0, n);

  std::vector<std::vector<SearchHit>> partial(static_cast<size_t>(shards));
  parallel_chunks(static_cast<size_t>(shards), shards,
                  [&](int, size_t begin, size_t end) {
                    for (size_t s = begin; s < end; ++s) {
                      const uint64_t lo = n * s / static_cast<uint64_t>(shards);
                      const uint64_t hi =
                          n * (s + 1) / static_cast<uint64_t>(shards);
                      partial[s] = scan_range(*this, query, keep, lo, hi);
                    }
                  });

  std::vector<SearchHit> merged;
  for (auto& p : partial)
    merged.insert(merged.end(), std::make_move_iterator(p.begin()),
                  std::make_move_iterator(p.end()));
  std::sort(merged.begin(), merged.end(), hit_before);
  if (merged.size() > keep) merged.resize(keep);
  return merged;
}

} // namespace atd::vecindex
