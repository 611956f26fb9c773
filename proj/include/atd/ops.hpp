#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "atd/rng.hpp"
#include "atd/tensor.hpp"

namespace atd::numkit {

// Elementwise; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// c[i,j] = sum_t a[i,t] b[t,j]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// a: [m x n], v: [n]; adds v to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& v);

// Stable softmax over the last axis. A -inf input is the mask sentinel and
// maps to exactly 0; a slice with every position masked is an error.
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);

// Per-row normalization over the last axis of a 2-D tensor, with learnable
// gain and bias of width n.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// table: [V x d]; returns [ids.size() x d]. Duplicate ids accumulate grads.
Tensor embedding_lookup(const Tensor& table, const std::vector<int32_t>& ids);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, int64_t start, int64_t count);

// Same elements, new shape (row-major order preserved).
Tensor reshape(const Tensor& x, Shape shape);

// 2-D reductions along one named axis (0 = over rows, 1 = over cols).
Tensor reduce_mean(const Tensor& x, int axis);
Tensor reduce_max(const Tensor& x, int axis); // ties: first index wins

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// 1-D inner product -> scalar.
Tensor dot(const Tensor& a, const Tensor& b);

// Stacks scalar tensors into a 1-D vector.
Tensor stack_scalars(std::span<const Tensor> scalars);

// Writes `value` (typically the -inf sentinel) where mask is nonzero.
Tensor mask_fill(const Tensor& x, const std::vector<uint8_t>& mask,
                 double value);

// Inverted dropout; identity when rate == 0 (no rng draw).
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Mean over rows of -log softmax(logits)[target]: token-level cross-entropy.
Tensor cross_entropy_rows(const Tensor& logits,
                          const std::vector<int32_t>& targets);

// ---- attention kernel -------------------------------------------------------

struct KeySpan {
  int64_t begin = 0;
  int64_t end = 0;
};

struct AttendResult {
  Tensor output;              // [T x d_v]
  std::vector<double> scores; // pre-softmax [T x T_in], detached
};

// Fused attention over segmented keys. Keys outside every span are excluded
// from the softmax (mask semantics); `causal` restricts row i to keys <= i.
// Softmax and value sums are accumulated per span and combined in the given
// span order, so callers that pass spans in a canonical order get outputs
// that are bit-identical under any permutation of the underlying segments.
AttendResult attend(const Tensor& q, const Tensor& k, const Tensor& v,
                    std::span<const KeySpan> spans, bool causal,
                    double score_scale = 1.0, bool want_scores = false);

// ---- fused distillation losses ----------------------------------------------

// KL(softmax(targets) || softmax(scores)); gradient flows through scores only.
Tensor kl_to_targets(const Tensor& scores, const std::vector<double>& targets);
// sum_p (scores_p - targets_p)^2
Tensor mse_to_targets(const Tensor& scores, const std::vector<double>& targets);
// Hinge over unordered pairs with distinct targets; tied-target pairs skipped.
Tensor margin_ranking(const Tensor& scores, const std::vector<double>& targets,
                      double margin);

// Elementwise op with caller-supplied value and derivative functions; the
// extension point custom and deliberately-wrong gradients hook into in tests.
Tensor custom_unary(const Tensor& x, const std::function<double(double)>& f,
                    const std::function<double(double)>& dfdx);

// softmax of a raw slice, used by replay checks; no tape involvement.
std::vector<double> softmax_values(std::span<const double> logits);

} // namespace atd::numkit
