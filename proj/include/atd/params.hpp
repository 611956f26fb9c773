#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "atd/rng.hpp"
#include "atd/tensor.hpp"

namespace atd::numkit {

// Ordered collection of named parameter tensors. Iteration order is insertion
// order everywhere, which keeps optimizers and checkpoints reproducible.
class ParamStore {
public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& add_randn(const std::string& name, Shape shape, Rng& rng,
                    double stddev);
  Tensor& add_zeros(const std::string& name, Shape shape);
  Tensor& add_full(const std::string& name, Shape shape, double value);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  size_t size() const { return items_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }

  void zero_grad();
  int64_t total_size() const;

  // Same names and shared data buffers, fresh gradient slots. Workers build
  // graphs against a shadow and the owner merges grads in worker order.
  ParamStore shadow() const;
  void accumulate_grads_from(const ParamStore& other);

  // Order-insensitive digest of all values; used by round-continuity checks.
  uint64_t value_checksum() const;

private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

} // namespace atd::numkit
