#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace atd::vecindex {

struct SearchHit {
  std::string pid;
  double score = 0.0;
};

// Exact inner-product search over a flat row store. Rows are f32; dot
// products accumulate in f64. Results are ordered by (score desc, pid asc),
// so ties are deterministic. Immutable after build.
//
// On-disk ATDX layout: magic "ATDX", u32 version, u32 dim, u64 count,
// count*dim little-endian f32 rows, then count pids as u32-length-prefixed
// strings. Write -> read -> write is byte-identical.
class FlatIndex {
public:
  static FlatIndex build(
      std::span<const std::pair<std::string, std::vector<float>>> rows,
      uint32_t dim);

  void save(const std::string& path) const;
  static FlatIndex load(const std::string& path);

  uint32_t dim() const { return dim_; }
  uint64_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(uint64_t i) const {
    return {rows_.data() + i * dim_, dim_};
  }

  // min(k, count) hits; shards > 1 splits the rows into contiguous ranges
  // searched in parallel and merged, which must return the identical list.
  std::vector<SearchHit> topk(std::span<const double> query, int k,
                              int shards = 1) const;

private:
  uint32_t dim_ = 0;
  std::vector<float> rows_;
  std::vector<std::string> ids_;
};

} // namespace atd::vecindex
