#include "atd/params.hpp"

#include <cstring>

namespace atd::numkit {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name))
    throw ArgumentError("duplicate parameter name: " + name);
  index_.emplace(name, items_.size());
  items_.emplace_back(name, std::move(t));
  return items_.back().second;
}

Tensor& ParamStore::add_randn(const std::string& name, Shape shape, Rng& rng,
                              double stddev) {
  const int64_t n = shape_numel(shape);
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = rng.normal() * stddev;
  return add(name, Tensor::from_data(std::move(shape), std::move(data),
                                     /*requires_grad=*/true));
}

Tensor& ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), /*requires_grad=*/true));
}

Tensor& ParamStore::add_full(const std::string& name, Shape shape,
                             double value) {
  return add(name,
             Tensor::full(std::move(shape), value, /*requires_grad=*/true));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
  return items_[it->second].second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter: " + name);
  return items_[it->second].second;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

ParamStore ParamStore::shadow() const {
  ParamStore out;
  for (const auto& [name, t] : items_) out.add(name, t.shadow());
  return out;
}

void ParamStore::accumulate_grads_from(const ParamStore& other) {
  if (other.items_.size() != items_.size())
    throw ArgumentError("accumulate_grads_from: parameter sets differ");
  for (size_t i = 0; i < items_.size(); ++i) {
    if (other.items_[i].first != items_[i].first)
      throw ArgumentError("accumulate_grads_from: parameter order differs");
    const Tensor& src = other.items_[i].second;
    if (!src.has_grad()) continue;
    auto dst = items_[i].second.grad();
    const auto sg = src.grad();
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += sg[j];
  }
}

uint64_t ParamStore::value_checksum() const {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : items_) {
    mix(name.data(), name.size());
    const auto d = t.data();
    mix(d.data(), d.size() * sizeof(double));
  }
  return h;
}

} // namespace atd::numkit
