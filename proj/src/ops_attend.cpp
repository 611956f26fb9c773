#include <algorithm>
#include <cmath>
#include <limits>

#include "atd/ops.hpp"

namespace atd::numkit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double* grad_of(const detail::ImplPtr& impl) {
  return impl->needs_grad ? impl->grad_buf() : nullptr;
}

} // namespace

AttendResult attend(const Tensor& q, const Tensor& k, const Tensor& v,
                    std::span<const KeySpan> spans, bool causal,
                    double score_scale, bool want_scores) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw ArgumentError("attend: q, k, v must be 2-D");
  if (q.extent(1) != k.extent(1))
    throw ArgumentError("attend: query/key width mismatch " +
                        shape_str(q.shape()) + " vs " + shape_str(k.shape()));
  if (k.extent(0) != v.extent(0))
    throw ArgumentError("attend: key/value row-count mismatch");
  if (spans.empty()) throw ArgumentError("attend: no key spans");

  const int64_t t_out = q.extent(0);
  const int64_t t_in = k.extent(0);
  const int64_t dh = q.extent(1);
  const int64_t dv = v.extent(1);

  {
    std::vector<KeySpan> sorted(spans.begin(), spans.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const KeySpan& a, const KeySpan& b) { return a.begin < b.begin; });
    int64_t prev_end = 0;
    for (const KeySpan& s : sorted) {
      if (s.begin < 0 || s.end < s.begin || s.end > t_in)
        throw ArgumentError("attend: span outside key range");
      if (s.begin < prev_end) throw ArgumentError("attend: overlapping spans");
      prev_end = s.end;
    }
  }

  const double* qp = q.data().data();
  const double* kp = k.data().data();
  const double* vp = v.data().data();

  // Raw scores for allowed keys; excluded keys carry the -inf sentinel.
  std::vector<double> z(static_cast<size_t>(t_out * t_in), kNegInf);
  for (int64_t i = 0; i < t_out; ++i) {
    const double* qrow = qp + i * dh;
    double* zrow = z.data() + i * t_in;
    for (const KeySpan& s : spans) {
      const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
      for (int64_t j = s.begin; j < hi; ++j) {
        const double* krow = kp + j * dh;
        double acc = 0.0;
        for (int64_t c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
        zrow[j] = acc * score_scale;
      }
    }
  }

  // Softmax and the value-weighted sum accumulate per span and combine in the
  // order the spans were given, so outputs are independent of how segments are
  // laid out in the key matrix when the caller passes a canonical span order.
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(t_out * t_in), 0.0);
  std::vector<double> out(static_cast<size_t>(t_out * dv), 0.0);
  std::vector<double> partial(static_cast<size_t>(dv));
  for (int64_t i = 0; i < t_out; ++i) {
    const double* zrow = z.data() + i * t_in;
    double m = kNegInf;
    for (const KeySpan& s : spans) {
      const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
      for (int64_t j = s.begin; j < hi; ++j) m = std::max(m, zrow[j]);
    }
    if (m == kNegInf)
      throw DataError("attend: no keys available for query row " +
                      std::to_string(i));
    double denom = 0.0;
    double* prow = probs->data() + i * t_in;
    for (const KeySpan& s : spans) {
      const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
      double span_sum = 0.0;
      for (int64_t j = s.begin; j < hi; ++j) {
        const double e = std::exp(zrow[j] - m);
        prow[j] = e;
        span_sum += e;
      }
      denom += span_sum;
    }
    double* orow = out.data() + i * dv;
    for (const KeySpan& s : spans) {
      const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
      std::fill(partial.begin(), partial.end(), 0.0);
      for (int64_t j = s.begin; j < hi; ++j) {
        prow[j] /= denom;
        const double w = prow[j];
        const double* vrow = vp + j * dv;
        for (int64_t c = 0; c < dv; ++c) partial[static_cast<size_t>(c)] += w * vrow[c];
      }
      for (int64_t c = 0; c < dv; ++c) orow[c] += partial[static_cast<size_t>(c)];
    }
  }

  std::vector<KeySpan> spans_held(spans.begin(), spans.end());
  auto qi = q.impl();
  auto ki = k.impl();
  auto vi = v.impl();
  Tensor output = detail::make_result(
      Shape{t_out, dv}, std::move(out), "attend", {q, k, v},
      [qi, ki, vi, probs, spans_held, causal, score_scale, t_out, t_in, dh,
       dv](std::span<const double> g, std::span<const double>) {
        const double* qp2 = qi->data->data();
        const double* kp2 = ki->data->data();
        const double* vp2 = vi->data->data();
        double* gq = grad_of(qi);
        double* gk = grad_of(ki);
        double* gv = grad_of(vi);
        std::vector<double> dz(static_cast<size_t>(t_in));
        for (int64_t i = 0; i < t_out; ++i) {
          const double* prow = probs->data() + i * t_in;
          const double* grow = g.data() + i * dv;
          // d(prob)_j = dO_i . V_j ; dz_j = p_j (d(prob)_j - sum_t p_t d(prob)_t)
          double mix = 0.0;
          for (const KeySpan& s : spans_held) {
            const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
            for (int64_t j = s.begin; j < hi; ++j) {
              const double* vrow = vp2 + j * dv;
              double dp = 0.0;
              for (int64_t c = 0; c < dv; ++c) dp += grow[c] * vrow[c];
              dz[static_cast<size_t>(j)] = dp;
              mix += prow[j] * dp;
            }
          }
          for (const KeySpan& s : spans_held) {
            const int64_t hi = causal ? std::min(s.end, i + 1) : s.end;
            for (int64_t j = s.begin; j < hi; ++j) {
              const double w = prow[j];
              if (gv) {
                double* gvrow = gv + j * dv;
                for (int64_t c = 0; c < dv; ++c) gvrow[c] += w * grow[c];
              }
              const double dzj = score_scale * w * (dz[static_cast<size_t>(j)] - mix);
              if (dzj == 0.0) continue;
              const double* krow = kp2 + j * dh;
              const double* qrow = qp2 + i * dh;
              if (gq) {
                double* gqrow = gq + i * dh;
                for (int64_t c = 0; c < dh; ++c) gqrow[c] += dzj * krow[c];
              }
              if (gk) {
                double* gkrow = gk + j * dh;
                for (int64_t c = 0; c < dh; ++c) gkrow[c] += dzj * qrow[c];
              }
            }
          }
        }
      });

  AttendResult result;
  result.output = std::move(output);
  if (want_scores) result.scores = std::move(z);
  return result;
}

} // namespace atd::numkit
