#include <algorithm>
#include <cmath>
#include <memory>

#include "atd/ops.hpp"

namespace atd::numkit {

namespace {

double* grad_of(const detail::ImplPtr& impl) {
  return impl->needs_grad ? impl->grad_buf() : nullptr;
}

void require_scores(const Tensor& scores, const std::vector<double>& targets,
                    const char* op, size_t min_size) {
  if (scores.rank() != 1)
    throw ArgumentError(std::string(op) + ": scores must be 1-D");
  if (static_cast<size_t>(scores.extent(0)) != targets.size())
    throw ArgumentError(std::string(op) +
                        ": scores and targets must have equal length");
  if (targets.size() < min_size)
    throw ArgumentError(std::string(op) + ": needs at least " +
                        std::to_string(min_size) + " entries");
}

// log softmax with the usual max-shift
std::vector<double> log_probs(std::span<const double> x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double z = 0.0;
  for (double v : x) z += std::exp(v - m);
  const double logz = std::log(z) + m;
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - logz;
  return out;
}

} // namespace

Tensor kl_to_targets(const Tensor& scores, const std::vector<double>& targets) {
  require_scores(scores, targets, "kl_to_targets", 1);
  const auto sv = scores.data();
  const std::vector<double> log_g = log_probs(targets);
  const std::vector<double> log_s = log_probs(sv);
  const size_t n = targets.size();
  auto probs = std::make_shared<std::vector<double>>(2 * n);
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double gt = std::exp(log_g[i]);
    (*probs)[i] = gt;                     // target distribution
    (*probs)[n + i] = std::exp(log_s[i]); // model distribution
    loss += gt * (log_g[i] - log_s[i]);
  }
  auto si = scores.impl();
  return detail::make_result(
      Shape{}, {loss}, "kl_to_targets", {scores},
      [si, probs, n](std::span<const double> g, std::span<const double>) {
        if (double* gs = grad_of(si))
          for (size_t i = 0; i < n; ++i)
            gs[i] += g[0] * ((*probs)[n + i] - (*probs)[i]);
      });
}

Tensor mse_to_targets(const Tensor& scores, const std::vector<double>& targets) {
  require_scores(scores, targets, "mse_to_targets", 1);
  const auto sv = scores.data();
  double loss = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const double d = sv[i] - targets[i];
    loss += d * d;
  }
  auto si = scores.impl();
  auto targets_held = std::make_shared<std::vector<double>>(targets);
  return detail::make_result(
      Shape{}, {loss}, "mse_to_targets", {scores},
      [si, targets_held](std::span<const double> g, std::span<const double>) {
        if (double* gs = grad_of(si)) {
          const auto& sv2 = *si->data;
          for (size_t i = 0; i < targets_held->size(); ++i)
            gs[i] += g[0] * 2.0 * (sv2[i] - (*targets_held)[i]);
        }
      });
}

Tensor margin_ranking(const Tensor& scores, const std::vector<double>& targets,
                      double margin) {
  if (margin <= 0.0) throw ArgumentError("margin_ranking: margin must be > 0");
  require_scores(scores, targets, "margin_ranking", 2);
  const auto sv = scores.data();
  const size_t n = targets.size();
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      if (targets[i] == targets[j]) continue;
      const double sgn = targets[i] > targets[j] ? 1.0 : -1.0;
      const double term = margin - sgn * (sv[i] - sv[j]);
      if (term > 0.0) loss += term;
    }
  auto si = scores.impl();
  auto targets_held = std::make_shared<std::vector<double>>(targets);
  return detail::make_result(
      Shape{}, {loss}, "margin_ranking", {scores},
      [si, targets_held, margin](std::span<const double> g,
                                 std::span<const double>) {
        double* gs = grad_of(si);
        if (!gs) return;
        const auto& sv2 = *si->data;
        const auto& tv = *targets_held;
        for (size_t i = 0; i < tv.size(); ++i)
          for (size_t j = i + 1; j < tv.size(); ++j) {
            if (tv[i] == tv[j]) continue;
            const double sgn = tv[i] > tv[j] ? 1.0 : -1.0;
            if (margin - sgn * (sv2[i] - sv2[j]) > 0.0) {
              gs[i] -= g[0] * sgn;
              gs[j] += g[0] * sgn;
            }
          }
      });
}

} // namespace atd::numkit
