#include "atd/checkpoint.hpp"

#include <cstring>

#include "atd/io_util.hpp"

namespace atd::numkit {

namespace {
constexpr char kMagic[4] = {'A', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;
} // namespace

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

Tensor Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw DataError("checkpoint has no tensor named " + name);
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  nlohmann::json list = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    list.push_back(std::move(entry));
    offset += t.numel();
  }
  manifest["tensors"] = std::move(list);
  const std::string manifest_bytes = manifest.dump();

  std::string blob;
  blob.reserve(16 + manifest_bytes.size() +
               static_cast<size_t>(offset) * sizeof(double));
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u64(blob, manifest_bytes.size());
  blob += manifest_bytes;
  for (const auto& [name, t] : tensors)
    for (double v : t.data()) put_f64(blob, v);
  write_file(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  ByteReader r(blob, path);
  if (r.take(4) != std::string_view(kMagic, 4))
    throw DataError("not a checkpoint file: " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path);
  const uint64_t manifest_len = r.u64();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.take(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint manifest in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  const size_t payload_start = 16 + manifest_len;
  const size_t payload_elems = r.remaining() / sizeof(double);
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    const int64_t offset = entry.at("offset").get<int64_t>();
    const int64_t n = shape_numel(shape);
    if (offset < 0 || static_cast<size_t>(offset + n) > payload_elems)
      throw DataError("checkpoint tensor " + name + " exceeds payload in " +
                      path);
    std::vector<double> data(static_cast<size_t>(n));
    std::memcpy(data.data(),
                blob.data() + payload_start +
                    static_cast<size_t>(offset) * sizeof(double),
                static_cast<size_t>(n) * sizeof(double));
    ckpt.tensors.emplace_back(
        name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

} // namespace atd::numkit
