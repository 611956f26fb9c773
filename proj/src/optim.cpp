#include "atd/optim.hpp"

#include <cmath>

namespace atd::numkit {

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  if (cfg_.lr < 0.0) throw ArgumentError("Adam: learning rate must be >= 0");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, t] : params.items()) {
    m_.push_back(Tensor::zeros(t.shape()));
    v_.push_back(Tensor::zeros(t.shape()));
  }
}

void Adam::step() {
  auto& items = params_->items();
  double sq = 0.0;
  for (const auto& [name, t] : items) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  last_grad_norm_ = std::sqrt(sq);
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0 && last_grad_norm_ > cfg_.clip_norm)
    scale = cfg_.clip_norm / last_grad_norm_;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t p = 0; p < items.size(); ++p) {
    Tensor& t = const_cast<Tensor&>(items[p].second);
    auto data = t.mutable_data();
    auto grad = t.grad();
    auto mm = m_[p].mutable_data();
    auto vv = v_[p].mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * scale;
      mm[i] = cfg_.beta1 * mm[i] + (1.0 - cfg_.beta1) * g;
      vv[i] = cfg_.beta2 * vv[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = mm[i] / bc1;
      const double vhat = vv[i] / bc2;
      data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> Adam::state_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  const auto& items = params_->items();
  for (size_t p = 0; p < items.size(); ++p) {
    out.emplace_back("opt.m." + items[p].first, m_[p]);
    out.emplace_back("opt.v." + items[p].first, v_[p]);
  }
  out.emplace_back("opt.step",
                   Tensor::from_data({1}, {static_cast<double>(t_)}));
  return out;
}

void Adam::restore_state(
    const std::function<Tensor(const std::string&)>& lookup) {
  const auto& items = params_->items();
  for (size_t p = 0; p < items.size(); ++p) {
    Tensor m = lookup("opt.m." + items[p].first);
    Tensor v = lookup("opt.v." + items[p].first);
    if (m.shape() != items[p].second.shape() ||
        v.shape() != items[p].second.shape())
      throw DataError("optimizer state shape mismatch for " + items[p].first);
    m_[p] = m.detached_clone();
    v_[p] = v.detached_clone();
  }
  Tensor step = lookup("opt.step");
  t_ = static_cast<int64_t>(step.data()[0]);
}

} // namespace atd::numkit
