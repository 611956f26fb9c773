#include "atd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace atd::numkit {

GradcheckReport gradcheck(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params, double step,
    double tol) {
  if (!(step > 0.0 && step <= 1e-2))
    throw ArgumentError("gradcheck: step must be in (0, 1e-2]");
  if (tol <= 0.0) throw ArgumentError("gradcheck: tol must be > 0");

  {
    NoGradGuard ng;
    const double v1 = f().item();
    const double v2 = f().item();
    if (v1 != v2)
      throw DataError("gradcheck: function is not deterministic (" +
                      std::to_string(v1) + " vs " + std::to_string(v2) + ")");
  }

  for (auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
  Tensor loss = f();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, t] : params) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradcheckReport report;
  report.max_rel_err = 0.0;
  NoGradGuard ng;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& t = const_cast<Tensor&>(params[p].second);
    auto data = t.mutable_data();
    GradcheckEntry entry{params[p].first, 0.0};
    for (size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double fp = f().item();
      data[i] = saved - step;
      const double fm = f().item();
      data[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double a = analytic[p][i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(fd)});
      entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(a - fd) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

} // namespace atd::numkit
