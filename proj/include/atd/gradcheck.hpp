#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "atd/tensor.hpp"

namespace atd::numkit {

struct GradcheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> params;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares the tape gradient of f against central finite differences for
// every element of every listed parameter. f must rebuild its graph on each
// call from the parameters' current values; it is evaluated twice up front
// and a mismatch raises a determinism error.
//
// Relative error is |analytic - fd| / max(1, |analytic|, |fd|); the floor
// keeps round-off noise in near-zero gradients from dominating the report.
GradcheckReport gradcheck(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double step = 1e-5, double tol = 1e-4);

} // namespace atd::numkit
