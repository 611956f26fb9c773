#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "atd/errors.hpp"

namespace atd {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

// ---- little-endian scalar append / read ------------------------------------

inline void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

inline void put_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

// Cursor over an in-memory blob with bounds checking.
class ByteReader {
public:
  ByteReader(std::string_view bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  uint32_t u32() { return scalar<uint32_t>(); }
  uint64_t u64() { return scalar<uint64_t>(); }
  float f32() { return scalar<float>(); }
  double f64() { return scalar<double>(); }

  std::string_view take(size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

private:
  template <class T>
  T scalar() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void need(size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw DataError("truncated file: " + origin_);
  }

  std::string_view bytes_;
  std::string origin_;
  size_t pos_ = 0;
};

// ---- whole-file helpers -----------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);
bool file_exists(const std::string& path);

// Reads newline-delimited records, dropping a trailing empty line.
std::vector<std::string> read_lines(const std::string& path);

// Doubles serialized with 17 significant digits round-trip exactly.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// JSON string escaping for the hand-rolled jsonl writers.
std::string json_escape(std::string_view s);

} // namespace atd
