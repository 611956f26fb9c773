#include "atd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atd::numkit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ArgumentError(std::string(op) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Gradient buffer of an input if it participates in the backward pass.
double* grad_of(const detail::ImplPtr& impl) {
  return impl->needs_grad ? impl->grad_buf() : nullptr;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result(
      a.shape(), std::move(out), "add", {a, b},
      [ai, bi](std::span<const double> g, std::span<const double>) {
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (double* gb = grad_of(bi))
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result(
      a.shape(), std::move(out), "sub", {a, b},
      [ai, bi](std::span<const double> g, std::span<const double>) {
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (double* gb = grad_of(bi))
          for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result(
      a.shape(), std::move(out), "mul", {a, b},
      [ai, bi](std::span<const double> g, std::span<const double>) {
        const auto& av2 = *ai->data;
        const auto& bv2 = *bi->data;
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        if (double* gb = grad_of(bi))
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
      });
}

Tensor scale(const Tensor& a, double s) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  auto ai = a.impl();
  return detail::make_result(
      a.shape(), std::move(out), "scale", {a},
      [ai, s](std::span<const double> g, std::span<const double>) {
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be 2-D");
  if (a.extent(1) != b.extent(0))
    throw ArgumentError("matmul: inner extents differ, " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t m = a.extent(0), kk = a.extent(1), n = b.extent(1);
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  double* op = out.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = ap + i * kk;
    double* orow = op + i * n;
    for (int64_t t = 0; t < kk; ++t) {
      const double av = arow[t];
      if (av == 0.0) continue;
      const double* brow = bp + t * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result(
      Shape{m, n}, std::move(out), "matmul", {a, b},
      [ai, bi, m, kk, n](std::span<const double> g, std::span<const double>) {
        const double* ap2 = ai->data->data();
        const double* bp2 = bi->data->data();
        if (double* ga = grad_of(ai)) {
          // dA = dC . B^T
          for (int64_t i = 0; i < m; ++i)
            for (int64_t t = 0; t < kk; ++t) {
              double acc = 0.0;
              const double* grow = g.data() + i * n;
              const double* brow = bp2 + t * n;
              for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * kk + t] += acc;
            }
        }
        if (double* gb = grad_of(bi)) {
          // dB = A^T . dC
          for (int64_t t = 0; t < kk; ++t)
            for (int64_t i = 0; i < m; ++i) {
              const double av = ap2[i * kk + t];
              if (av == 0.0) continue;
              const double* grow = g.data() + i * n;
              double* gbrow = gb + t * n;
              for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
      });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: operand must be 2-D");
  const int64_t m = a.extent(0), n = a.extent(1);
  const double* ap = a.data().data();
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = ap[i * n + j];
  auto ai = a.impl();
  return detail::make_result(
      Shape{n, m}, std::move(out), "transpose", {a},
      [ai, m, n](std::span<const double> g, std::span<const double>) {
        if (double* ga = grad_of(ai))
          for (int64_t j = 0; j < n; ++j)
            for (int64_t i = 0; i < m; ++i) ga[i * n + j] += g[j * m + i];
      },
      /*allow_neg_inf=*/true);
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  require(a.rank() == 2 && v.rank() == 1, "add_rowvec: need 2-D input, 1-D vector");
  if (a.extent(1) != v.extent(0))
    throw ArgumentError("add_rowvec: width mismatch " + shape_str(a.shape()) +
                        " vs " + shape_str(v.shape()));
  const int64_t m = a.extent(0), n = a.extent(1);
  const double* ap = a.data().data();
  const double* vp = v.data().data();
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[i * n + j] = ap[i * n + j] + vp[j];
  auto ai = a.impl();
  auto vi = v.impl();
  return detail::make_result(
      a.shape(), std::move(out), "add_rowvec", {a, v},
      [ai, vi, m, n](std::span<const double> g, std::span<const double>) {
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (double* gv = grad_of(vi))
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) gv[j] += g[i * n + j];
      });
}

namespace {

// Shared softmax-over-last-axis forward; returns probabilities.
std::vector<double> softmax_forward(const Tensor& x, const char* op) {
  require(x.rank() >= 1, std::string(op) + ": operand must have rank >= 1");
  const int64_t width = x.extent(static_cast<size_t>(x.rank() - 1));
  const int64_t slices = x.numel() / width;
  const double* xp = x.data().data();
  std::vector<double> probs(static_cast<size_t>(x.numel()));
  for (int64_t s = 0; s < slices; ++s) {
    const double* row = xp + s * width;
    double m = kNegInf;
    for (int64_t j = 0; j < width; ++j) m = std::max(m, row[j]);
    if (m == kNegInf)
      throw DataError(std::string(op) + ": every position in a slice is masked");
    double z = 0.0;
    double* prow = probs.data() + s * width;
    for (int64_t j = 0; j < width; ++j) {
      const double e = row[j] == kNegInf ? 0.0 : std::exp(row[j] - m);
      prow[j] = e;
      z += e;
    }
    for (int64_t j = 0; j < width; ++j) prow[j] /= z;
  }
  return probs;
}

} // namespace

std::vector<double> softmax_values(std::span<const double> logits) {
  Tensor t = Tensor::from_data({static_cast<int64_t>(logits.size())},
                               {logits.begin(), logits.end()});
  return softmax_forward(t, "softmax_values");
}

Tensor softmax_lastdim(const Tensor& x) {
  std::vector<double> probs = softmax_forward(x, "softmax_lastdim");
  const int64_t width = x.extent(static_cast<size_t>(x.rank() - 1));
  auto xi = x.impl();
  return detail::make_result(
      x.shape(), std::move(probs), "softmax_lastdim", {x},
      [xi, width](std::span<const double> g, std::span<const double> y) {
        double* gx = grad_of(xi);
        if (!gx) return;
        const int64_t slices = static_cast<int64_t>(y.size()) / width;
        for (int64_t s = 0; s < slices; ++s) {
          const double* yrow = y.data() + s * width;
          const double* grow = g.data() + s * width;
          double dotv = 0.0;
          for (int64_t j = 0; j < width; ++j) dotv += grow[j] * yrow[j];
          double* gxrow = gx + s * width;
          for (int64_t j = 0; j < width; ++j)
            gxrow[j] += yrow[j] * (grow[j] - dotv);
        }
      });
}

Tensor log_softmax_lastdim(const Tensor& x) {
  std::vector<double> probs = softmax_forward(x, "log_softmax_lastdim");
  const int64_t width = x.extent(static_cast<size_t>(x.rank() - 1));
  std::vector<double> out(probs.size());
  for (size_t i = 0; i < probs.size(); ++i)
    out[i] = probs[i] == 0.0 ? kNegInf : std::log(probs[i]);
  auto xi = x.impl();
  auto probs_held = std::make_shared<std::vector<double>>(std::move(probs));
  return detail::make_result(
      x.shape(), std::move(out), "log_softmax_lastdim", {x},
      [xi, width, probs_held](std::span<const double> g,
                              std::span<const double>) {
        double* gx = grad_of(xi);
        if (!gx) return;
        const auto& p = *probs_held;
        const int64_t slices = static_cast<int64_t>(p.size()) / width;
        for (int64_t s = 0; s < slices; ++s) {
          const double* prow = p.data() + s * width;
          const double* grow = g.data() + s * width;
          double gsum = 0.0;
          for (int64_t j = 0; j < width; ++j) gsum += grow[j];
          double* gxrow = gx + s * width;
          for (int64_t j = 0; j < width; ++j)
            gxrow[j] += grow[j] - prow[j] * gsum;
        }
      },
      /*allow_neg_inf=*/true);
}

Tensor relu(const Tensor& x) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  auto xi = x.impl();
  return detail::make_result(
      x.shape(), std::move(out), "relu", {x},
      [xi](std::span<const double> g, std::span<const double>) {
        double* gx = grad_of(xi);
        if (!gx) return;
        const auto& xv2 = *xi->data;
        for (size_t i = 0; i < g.size(); ++i)
          if (xv2[i] > 0.0) gx[i] += g[i];
      });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const double cdf = 0.5 * (1.0 + std::erf(xv[i] * inv_sqrt2));
    out[i] = xv[i] * cdf;
  }
  auto xi = x.impl();
  return detail::make_result(
      x.shape(), std::move(out), "gelu", {x},
      [xi](std::span<const double> g, std::span<const double>) {
        double* gx = grad_of(xi);
        if (!gx) return;
        const auto& xv2 = *xi->data;
        for (size_t i = 0; i < g.size(); ++i) {
          const double v = xv2[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
          const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
          gx[i] += g[i] * (cdf + v * pdf);
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.rank() == 2, "layer_norm: input must be 2-D");
  require(gain.rank() == 1 && bias.rank() == 1,
          "layer_norm: gain and bias must be 1-D");
  const int64_t m = x.extent(0), n = x.extent(1);
  if (gain.extent(0) != n || bias.extent(0) != n)
    throw ArgumentError("layer_norm: gain/bias width must equal " +
                        std::to_string(n));
  const double* xp = x.data().data();
  const double* gp = gain.data().data();
  const double* bp = bias.data().data();
  std::vector<double> out(static_cast<size_t>(m * n));
  auto stats = std::make_shared<std::vector<double>>(
      static_cast<size_t>(m) * 2); // mean, inv_std per row
  for (int64_t i = 0; i < m; ++i) {
    const double* row = xp + i * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[static_cast<size_t>(i) * 2] = mean;
    (*stats)[static_cast<size_t>(i) * 2 + 1] = inv_std;
    double* orow = out.data() + i * n;
    for (int64_t j = 0; j < n; ++j)
      orow[j] = (row[j] - mean) * inv_std * gp[j] + bp[j];
  }
  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  return detail::make_result(
      Shape{m, n}, std::move(out), "layer_norm", {x, gain, bias},
      [xi, gi, bi, m, n, stats](std::span<const double> g,
                                std::span<const double>) {
        const double* xp2 = xi->data->data();
        const double* gp2 = gi->data->data();
        double* gx = grad_of(xi);
        double* gg = grad_of(gi);
        double* gb = grad_of(bi);
        for (int64_t i = 0; i < m; ++i) {
          const double mean = (*stats)[static_cast<size_t>(i) * 2];
          const double inv_std = (*stats)[static_cast<size_t>(i) * 2 + 1];
          const double* xrow = xp2 + i * n;
          const double* grow = g.data() + i * n;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            const double xhat = (xrow[j] - mean) * inv_std;
            const double dxhat = grow[j] * gp2[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            if (gg) gg[j] += grow[j] * xhat;
            if (gb) gb[j] += grow[j];
          }
          if (gx) {
            const double inv_n = 1.0 / static_cast<double>(n);
            double* gxrow = gx + i * n;
            for (int64_t j = 0; j < n; ++j) {
              const double xhat = (xrow[j] - mean) * inv_std;
              const double dxhat = grow[j] * gp2[j];
              gxrow[j] += inv_std * (dxhat - inv_n * sum_dxhat -
                                     xhat * inv_n * sum_dxhat_xhat);
            }
          }
        }
      });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int32_t>& ids) {
  require(table.rank() == 2, "embedding_lookup: table must be 2-D");
  require(!ids.empty(), "embedding_lookup: empty id list");
  const int64_t v = table.extent(0), d = table.extent(1);
  for (int32_t id : ids)
    if (id < 0 || id >= v)
      throw ArgumentError("embedding_lookup: id " + std::to_string(id) +
                          " outside table of " + std::to_string(v) + " rows");
  const int64_t m = static_cast<int64_t>(ids.size());
  const double* tp = table.data().data();
  std::vector<double> out(static_cast<size_t>(m * d));
  for (int64_t i = 0; i < m; ++i)
    std::copy_n(tp + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d, d,
                out.data() + i * d);
  auto ti = table.impl();
  auto ids_held = std::make_shared<std::vector<int32_t>>(ids);
  return detail::make_result(
      Shape{m, d}, std::move(out), "embedding_lookup", {table},
      [ti, ids_held, d](std::span<const double> g, std::span<const double>) {
        double* gt = grad_of(ti);
        if (!gt) return;
        const auto& idv = *ids_held;
        for (size_t i = 0; i < idv.size(); ++i) {
          double* trow = gt + static_cast<int64_t>(idv[i]) * d;
          const double* grow = g.data() + static_cast<int64_t>(i) * d;
          for (int64_t j = 0; j < d; ++j) trow[j] += grow[j];
        }
      });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const int64_t n = parts[0].extent(1);
  int64_t rows = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == 2, "concat_rows: inputs must be 2-D");
    if (p.extent(1) != n)
      throw ArgumentError("concat_rows: width mismatch " +
                          shape_str(p.shape()) + " vs width " +
                          std::to_string(n));
    rows += p.extent(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows * n));
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<int64_t> row_counts;
  for (const Tensor& p : parts) {
    const auto pv = p.data();
    out.insert(out.end(), pv.begin(), pv.end());
    row_counts.push_back(p.extent(0));
  }
  std::vector<detail::ImplPtr> impls;
  for (const Tensor& p : parts) impls.push_back(p.impl());
  return detail::make_result(
      Shape{rows, n}, std::move(out), "concat_rows", std::move(inputs),
      [impls, row_counts, n](std::span<const double> g,
                             std::span<const double>) {
        int64_t offset = 0;
        for (size_t p = 0; p < impls.size(); ++p) {
          const int64_t len = row_counts[p] * n;
          if (double* gp = grad_of(impls[p]))
            for (int64_t i = 0; i < len; ++i) gp[i] += g[offset + i];
          offset += len;
        }
      });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int64_t m = parts[0].extent(0);
  int64_t cols = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == 2, "concat_cols: inputs must be 2-D");
    if (p.extent(0) != m)
      throw ArgumentError("concat_cols: row-count mismatch " +
                          shape_str(p.shape()));
    cols += p.extent(1);
  }
  std::vector<double> out(static_cast<size_t>(m * cols));
  std::vector<int64_t> widths;
  int64_t col0 = 0;
  for (const Tensor& p : parts) {
    const int64_t w = p.extent(1);
    const double* pv = p.data().data();
    for (int64_t i = 0; i < m; ++i)
      std::copy_n(pv + i * w, w, out.data() + i * cols + col0);
    widths.push_back(w);
    col0 += w;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<detail::ImplPtr> impls;
  for (const Tensor& p : parts) impls.push_back(p.impl());
  return detail::make_result(
      Shape{m, cols}, std::move(out), "concat_cols", std::move(inputs),
      [impls, widths, m, cols](std::span<const double> g,
                               std::span<const double>) {
        int64_t col = 0;
        for (size_t p = 0; p < impls.size(); ++p) {
          const int64_t w = widths[p];
          if (double* gp = grad_of(impls[p]))
            for (int64_t i = 0; i < m; ++i)
              for (int64_t j = 0; j < w; ++j)
                gp[i * w + j] += g[i * cols + col + j];
          col += w;
        }
      });
}

Tensor slice_rows(const Tensor& x, int64_t start, int64_t count) {
  require(x.rank() == 2, "slice_rows: input must be 2-D");
  const int64_t m = x.extent(0), n = x.extent(1);
  if (start < 0 || count <= 0 || start + count > m)
    throw ArgumentError("slice_rows: range [" + std::to_string(start) + ", " +
                        std::to_string(start + count) + ") outside " +
                        shape_str(x.shape()));
  const double* xp = x.data().data();
  std::vector<double> out(xp + start * n, xp + (start + count) * n);
  auto xi = x.impl();
  return detail::make_result(
      Shape{count, n}, std::move(out), "slice_rows", {x},
      [xi, start, n](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi)) {
          double* base = gx + start * n;
          for (size_t i = 0; i < g.size(); ++i) base[i] += g[i];
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ArgumentError("reshape: cannot view " + shape_str(x.shape()) +
                        " as " + shape_str(shape));
  auto xi = x.impl();
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(
      std::move(shape), std::move(out), "reshape", {x},
      [xi](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi))
          for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      },
      /*allow_neg_inf=*/true);
}

Tensor reduce_mean(const Tensor& x, int axis) {
  require(x.rank() == 2, "reduce_mean: input must be 2-D");
  require(axis == 0 || axis == 1, "reduce_mean: axis must be 0 or 1");
  const int64_t m = x.extent(0), n = x.extent(1);
  const double* xp = x.data().data();
  const int64_t out_len = axis == 0 ? n : m;
  const int64_t denom = axis == 0 ? m : n;
  std::vector<double> out(static_cast<size_t>(out_len), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += xp[i * n + j];
  for (double& v : out) v /= static_cast<double>(denom);
  auto xi = x.impl();
  return detail::make_result(
      Shape{out_len}, std::move(out), "reduce_mean", {x},
      [xi, m, n, axis, denom](std::span<const double> g,
                              std::span<const double>) {
        if (double* gx = grad_of(xi)) {
          const double inv = 1.0 / static_cast<double>(denom);
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j)
              gx[i * n + j] += g[axis == 0 ? j : i] * inv;
        }
      });
}

Tensor reduce_max(const Tensor& x, int axis) {
  require(x.rank() == 2, "reduce_max: input must be 2-D");
  require(axis == 0 || axis == 1, "reduce_max: axis must be 0 or 1");
  const int64_t m = x.extent(0), n = x.extent(1);
  const double* xp = x.data().data();
  const int64_t out_len = axis == 0 ? n : m;
  std::vector<double> out(static_cast<size_t>(out_len), kNegInf);
  auto argmax = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(out_len), int64_t{-1});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      const int64_t o = axis == 0 ? j : i;
      if (xp[i * n + j] > out[static_cast<size_t>(o)]) {
        out[static_cast<size_t>(o)] = xp[i * n + j];
        (*argmax)[static_cast<size_t>(o)] = i * n + j;
      }
    }
  auto xi = x.impl();
  return detail::make_result(
      Shape{out_len}, std::move(out), "reduce_max", {x},
      [xi, argmax](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi))
          for (size_t o = 0; o < argmax->size(); ++o)
            gx[(*argmax)[o]] += g[o];
      });
}

Tensor sum_all(const Tensor& x) {
  const auto xv = x.data();
  double acc = 0.0;
  for (double v : xv) acc += v;
  auto xi = x.impl();
  return detail::make_result(
      Shape{}, {acc}, "sum_all", {x},
      [xi](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi)) {
          const size_t len = xi->data->size();
          for (size_t i = 0; i < len; ++i) gx[i] += g[0];
        }
      });
}

Tensor mean_all(const Tensor& x) {
  const auto xv = x.data();
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  auto xi = x.impl();
  return detail::make_result(
      Shape{}, {acc * inv}, "mean_all", {x},
      [xi, inv](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi)) {
          const size_t len = xi->data->size();
          for (size_t i = 0; i < len; ++i) gx[i] += g[0] * inv;
        }
      });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1, "dot: operands must be 1-D");
  if (a.extent(0) != b.extent(0))
    throw ArgumentError("dot: length mismatch " + shape_str(a.shape()) +
                        " vs " + shape_str(b.shape()));
  const auto av = a.data();
  const auto bv = b.data();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return detail::make_result(
      Shape{}, {acc}, "dot", {a, b},
      [ai, bi](std::span<const double> g, std::span<const double>) {
        const auto& av2 = *ai->data;
        const auto& bv2 = *bi->data;
        if (double* ga = grad_of(ai))
          for (size_t i = 0; i < av2.size(); ++i) ga[i] += g[0] * bv2[i];
        if (double* gb = grad_of(bi))
          for (size_t i = 0; i < bv2.size(); ++i) gb[i] += g[0] * av2[i];
      });
}

Tensor stack_scalars(std::span<const Tensor> scalars) {
  require(!scalars.empty(), "stack_scalars: no inputs");
  std::vector<double> out;
  out.reserve(scalars.size());
  for (const Tensor& s : scalars) {
    require(s.numel() == 1, "stack_scalars: inputs must be scalars");
    out.push_back(s.data()[0]);
  }
  std::vector<Tensor> inputs(scalars.begin(), scalars.end());
  std::vector<detail::ImplPtr> impls;
  for (const Tensor& s : scalars) impls.push_back(s.impl());
  const int64_t n_out = static_cast<int64_t>(out.size());
  return detail::make_result(
      Shape{n_out}, std::move(out), "stack_scalars", std::move(inputs),
      [impls](std::span<const double> g, std::span<const double>) {
        for (size_t i = 0; i < impls.size(); ++i)
          if (double* gs = grad_of(impls[i])) gs[0] += g[i];
      });
}

Tensor mask_fill(const Tensor& x, const std::vector<uint8_t>& mask,
                 double value) {
  if (static_cast<int64_t>(mask.size()) != x.numel())
    throw ArgumentError("mask_fill: mask length must equal tensor size");
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = mask[i] ? value : xv[i];
  auto xi = x.impl();
  auto mask_held = std::make_shared<std::vector<uint8_t>>(mask);
  return detail::make_result(
      x.shape(), std::move(out), "mask_fill", {x},
      [xi, mask_held](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi))
          for (size_t i = 0; i < g.size(); ++i)
            if (!(*mask_held)[i]) gx[i] += g[i];
      },
      /*allow_neg_inf=*/true);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const auto xv = x.data();
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  auto mask = std::make_shared<std::vector<uint8_t>>(xv.size());
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const bool kept = rng.uniform() < keep;
    (*mask)[i] = kept ? 1 : 0;
    out[i] = kept ? xv[i] * inv_keep : 0.0;
  }
  auto xi = x.impl();
  return detail::make_result(
      x.shape(), std::move(out), "dropout", {x},
      [xi, mask, inv_keep](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi))
          for (size_t i = 0; i < g.size(); ++i)
            if ((*mask)[i]) gx[i] += g[i] * inv_keep;
      });
}

Tensor cross_entropy_rows(const Tensor& logits,
                          const std::vector<int32_t>& targets) {
  require(logits.rank() == 2, "cross_entropy_rows: logits must be 2-D");
  const int64_t m = logits.extent(0), v = logits.extent(1);
  if (static_cast<int64_t>(targets.size()) != m)
    throw ArgumentError("cross_entropy_rows: need one target per row");
  for (int32_t t : targets)
    if (t < 0 || t >= v)
      throw ArgumentError("cross_entropy_rows: target id out of range");
  const double* lp = logits.data().data();
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(m * v));
  double loss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    const double* row = lp + i * v;
    double mx = row[0];
    for (int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    double* prow = probs->data() + i * v;
    for (int64_t j = 0; j < v; ++j) {
      prow[j] = std::exp(row[j] - mx);
      z += prow[j];
    }
    const double logz = std::log(z) + mx;
    for (int64_t j = 0; j < v; ++j) prow[j] /= z;
    loss += logz - row[targets[static_cast<size_t>(i)]];
  }
  loss /= static_cast<double>(m);
  auto li = logits.impl();
  auto targets_held = std::make_shared<std::vector<int32_t>>(targets);
  return detail::make_result(
      Shape{}, {loss}, "cross_entropy_rows", {logits},
      [li, probs, targets_held, m, v](std::span<const double> g,
                                      std::span<const double>) {
        if (double* gl = grad_of(li)) {
          const double s = g[0] / static_cast<double>(m);
          for (int64_t i = 0; i < m; ++i) {
            const double* prow = probs->data() + i * v;
            double* grow = gl + i * v;
            for (int64_t j = 0; j < v; ++j) grow[j] += s * prow[j];
            grow[(*targets_held)[static_cast<size_t>(i)]] -= s;
          }
        }
      });
}

Tensor custom_unary(const Tensor& x, const std::function<double(double)>& f,
                    const std::function<double(double)>& dfdx) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  auto xi = x.impl();
  return detail::make_result(
      x.shape(), std::move(out), "custom_unary", {x},
      [xi, dfdx](std::span<const double> g, std::span<const double>) {
        if (double* gx = grad_of(xi)) {
          const auto& xv2 = *xi->data;
          for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xv2[i]);
        }
      });
}

} // namespace atd::numkit
