#include "atd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace atd::numkit {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    if (e <= 0) throw ArgumentError("tensor extents must be positive, got " + shape_str(s));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {

detail::ImplPtr make_leaf(Shape shape, std::vector<double> data,
                          bool requires_grad) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(data.size()))
    throw ArgumentError("data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(data));
  impl->requires_grad = requires_grad;
  impl->needs_grad = requires_grad;
  return impl;
}

thread_local bool g_autograd_enabled = true;

} // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape),
                          std::vector<double>(static_cast<size_t>(n), 0.0),
                          requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape),
                          std::vector<double>(static_cast<size_t>(n), value),
                          requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value) {
  return Tensor(make_leaf(Shape{}, {value}, false));
}

std::span<const double> Tensor::grad() const {
  impl_->grad_buf();
  return {impl_->grad.data(), impl_->grad.size()};
}

double Tensor::item() const {
  if (numel() != 1)
    throw ArgumentError("item() requires a scalar, shape is " +
                        shape_str(impl_->shape));
  return (*impl_->data)[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  if (static_cast<int64_t>(idx.size()) != rank())
    throw ArgumentError("index rank mismatch");
  int64_t flat = 0;
  size_t axis = 0;
  for (int64_t i : idx) {
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return (*impl_->data)[static_cast<size_t>(flat)];
}

Tensor Tensor::detached_clone() const {
  return Tensor(make_leaf(impl_->shape, *impl_->data, false));
}

Tensor Tensor::shadow() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data; // shared storage
  impl->requires_grad = impl_->requires_grad;
  impl->needs_grad = impl_->needs_grad;
  return Tensor(impl);
}

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_autograd_enabled) {
  g_autograd_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_autograd_enabled = prev_; }

void backward(const Tensor& root) {
  if (!root.defined()) throw ArgumentError("backward on undefined tensor");
  if (root.numel() != 1)
    throw ArgumentError("backward requires a scalar root, shape is " +
                        shape_str(root.shape()));
  auto root_impl = root.impl();
  if (!root_impl->needs_grad) return;

  // Post-order DFS over needs_grad ancestors: children (inputs) first, so the
  // reversed order visits every node after all of its consumers.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  struct Frame {
    detail::TensorImpl* impl;
    size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root_impl.get(), 0});
  seen.insert(root_impl.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    detail::Node* node = f.impl->node.get();
    const size_t n_inputs = node ? node->inputs.size() : 0;
    if (f.next_input < n_inputs) {
      detail::TensorImpl* in = node->inputs[f.next_input++].get();
      if (in->needs_grad && seen.insert(in).second)
        stack.push_back({in, 0});
    } else {
      order.push_back(f.impl);
      stack.pop_back();
    }
  }

  // Adjoints are computed fresh per call; pre-existing grads are stashed and
  // added back afterwards so repeated backward() calls accumulate instead of
  // re-propagating stale values.
  std::vector<std::pair<detail::TensorImpl*, std::vector<double>>> stash;
  for (detail::TensorImpl* impl : order)
    if (!impl->grad.empty()) {
      stash.emplace_back(impl, std::move(impl->grad));
      impl->grad.clear();
    }

  root_impl->grad_buf()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* impl = *it;
    if (!impl->node || impl->grad.empty()) continue;
    impl->node->backward({impl->grad.data(), impl->grad.size()},
                         {impl->data->data(), impl->data->size()});
  }

  for (auto& [impl, old] : stash) {
    if (impl->grad.empty()) {
      impl->grad = std::move(old);
    } else {
      for (size_t i = 0; i < old.size(); ++i) impl->grad[i] += old[i];
    }
  }
}

namespace detail {

void check_finite(std::span<const double> vals, const char* op,
                  bool allow_neg_inf) {
  for (double v : vals) {
    if (std::isfinite(v)) continue;
    if (allow_neg_inf && v == -std::numeric_limits<double>::infinity())
      continue;
    throw DataError(std::string("non-finite value produced by ") + op);
  }
}

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>,
                                      std::span<const double>)>
                       backward_fn,
                   bool allow_neg_inf) {
  const int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(data.size()))
    throw ArgumentError(std::string(op) + ": output size mismatch");
  check_finite({data.data(), data.size()}, op, allow_neg_inf);

  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<double>>(std::move(data));

  bool needs = false;
  if (autograd_enabled()) {
    for (const Tensor& t : inputs)
      if (t.defined() && t.needs_grad()) {
        needs = true;
        break;
      }
  }
  if (needs) {
    impl->needs_grad = true;
    auto node = std::make_unique<Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.impl());
    node->backward = std::move(backward_fn);
    impl->node = std::move(node);
  }
  return Tensor(impl);
}

} // namespace detail

} // namespace atd::numkit
