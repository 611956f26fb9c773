#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "atd/errors.hpp"

namespace atd::numkit {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

// One recorded operation. `backward` receives the output's gradient and value
// and accumulates contributions into the grads of `inputs`. Inputs always
// precede outputs in construction order, so the implicit graph is a DAG.
struct Node {
  const char* op = "leaf";
  std::vector<ImplPtr> inputs;
  std::function<void(std::span<const double> out_grad,
                     std::span<const double> out_val)>
      backward;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad; // empty until first accumulation
  bool requires_grad = false;
  bool needs_grad = false; // requires_grad or any ancestor does
  std::unique_ptr<Node> node;

  int64_t numel() const { return static_cast<int64_t>(data->size()); }

  double* grad_buf() {
    if (grad.empty()) grad.assign(data->size(), 0.0);
    return grad.data();
  }
};

} // namespace detail

// Dense row-major f64 tensor with an optional gradient slot. Value-semantics
// handle: copies share the underlying buffer. Data is treated as immutable
// once an op has consumed the tensor; only `grad` mutates afterwards.
// A -inf element is reserved as the attention-mask sentinel and is the only
// non-finite value ops will accept or produce.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t extent(size_t axis) const { return impl_->shape[axis]; }
  int64_t numel() const { return impl_->numel(); }

  std::span<const double> data() const {
    return {impl_->data->data(), impl_->data->size()};
  }
  // For leaf initialization and optimizer updates only.
  std::span<double> mutable_data() {
    return {impl_->data->data(), impl_->data->size()};
  }

  bool requires_grad() const { return impl_->requires_grad; }
  bool needs_grad() const { return impl_->needs_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }

  // Allocates a zero gradient buffer on first use.
  std::span<double> grad() {
    impl_->grad_buf();
    return {impl_->grad.data(), impl_->grad.size()};
  }
  std::span<const double> grad() const;
  void zero_grad() {
    if (!impl_->grad.empty())
      std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }

  double item() const;
  // Row-major element access for tests and small readers.
  double at(std::initializer_list<int64_t> idx) const;

  // Deep copy of the value, detached from any graph.
  Tensor detached_clone() const;
  // Shares the data buffer, fresh gradient slot, leaf. Used by data-parallel
  // workers that merge gradients explicitly.
  Tensor shadow() const;

  const void* id() const { return impl_.get(); }
  const char* producer_op() const {
    return impl_->node ? impl_->node->op : "leaf";
  }

  detail::ImplPtr impl() const { return impl_; }
  explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

private:
  detail::ImplPtr impl_;
};

// Seeds d(root)=1 and accumulates d(root)/d(t) into every reachable tensor
// with needs_grad. Repeated calls accumulate; callers zero grads between
// optimizer steps. Root must be scalar.
void backward(const Tensor& root);

// Thread-local switch: when disabled, ops produce plain values with no
// recorded node (inference mode).
bool autograd_enabled();

class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

namespace detail {

// Shared constructor for op results; computes needs_grad, runs the finite
// check (NaN and +inf always rejected; -inf only where the mask sentinel is
// expected) and attaches the node when grad is needed.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>,
                                      std::span<const double>)>
                       backward_fn,
                   bool allow_neg_inf = false);

void check_finite(std::span<const double> vals, const char* op,
                  bool allow_neg_inf);

} // namespace detail

} // namespace atd::numkit
