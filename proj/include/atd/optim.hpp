#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "atd/params.hpp"

namespace atd::numkit {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0; // 0 disables clipping
};

// Adam with bias correction and optional global-norm gradient clipping.
// step() consumes current grads; the caller zeroes them between steps.
class Adam {
public:
  Adam(ParamStore& params, AdamConfig cfg);

  void step();
  int64_t steps_done() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  // L2 norm over all grads before any clipping in the most recent step.
  double last_grad_norm() const { return last_grad_norm_; }

  // Moment tensors and step counter, named for checkpointing.
  std::vector<std::pair<std::string, Tensor>> state_tensors() const;
  void restore_state(
      const std::function<Tensor(const std::string&)>& lookup);

private:
  ParamStore* params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
  double last_grad_norm_ = 0.0;
};

} // namespace atd::numkit
