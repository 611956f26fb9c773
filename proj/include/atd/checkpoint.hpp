#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "atd/tensor.hpp"

namespace atd::numkit {

// Checkpoint blob: "ATCK" magic, u32 version, u64 manifest length, manifest
// JSON, then a flat little-endian f64 payload. The manifest lists
// {name, shape, offset} per tensor (offset in elements) plus a free-form
// "meta" object. The writer is canonical, so load followed by save is
// byte-identical.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor>> tensors; // manifest order

  bool has(const std::string& name) const;
  Tensor tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const nlohmann::json& meta);

Checkpoint load_checkpoint(const std::string& path);

} // namespace atd::numkit
