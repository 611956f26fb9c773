#pragma once

#include <string>
#include <vector>

#include "atd/ops.hpp"
#include "atd/params.hpp"
#include "atd/tokenizer.hpp"

// Shared transformer building blocks: pre-norm residual layers, multi-head
// attention with per-head projection matrices, sinusoidal positions that
// restart at every segment.
namespace atd::nn {

struct BlockConfig {
  int d_model = 32;
  int n_heads = 2;
  int d_ff = 0; // 0 -> 4 * d_model
  double dropout = 0.1;
  // The attention score is the raw dot product by default; enabling this
  // multiplies scores by 1/sqrt(d_head).
  bool scale_attention = false;

  int head_dim() const { return d_model / n_heads; }
  int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  double score_scale() const;
  void validate() const;
};

// token embedding + sinusoidal positions starting at 0
numkit::Tensor embed_tokens(const numkit::Tensor& table,
                            const datakit::TokenSeq& ids, int d_model);

// Parameter registration; names are "<prefix>.q0", ".k0", ".v0", ... ".o",
// "<prefix>.g"/".b" for norms, "<prefix>.w1"/".b1"/".w2"/".b2" for the mlp.
void add_attention_params(numkit::ParamStore& store, const std::string& prefix,
                          const BlockConfig& cfg, Rng& rng);
void add_norm_params(numkit::ParamStore& store, const std::string& prefix,
                     int width);
void add_ffn_params(numkit::ParamStore& store, const std::string& prefix,
                    const BlockConfig& cfg, Rng& rng);

struct AttentionScores {
  // pre-softmax [t_out x t_in] per head, in head order; filled when requested
  std::vector<std::vector<double>> per_head;
};

// Multi-head attention: queries from `from`, keys/values from `memory`.
// Spans restrict and segment the softmax (see numkit::attend); they must be
// passed in canonical order when permutation covariance matters.
numkit::Tensor attention(const numkit::ParamStore& store,
                         const std::string& prefix, const BlockConfig& cfg,
                         const numkit::Tensor& from,
                         const numkit::Tensor& memory,
                         std::span<const numkit::KeySpan> spans, bool causal,
                         AttentionScores* scores_out = nullptr);

numkit::Tensor norm(const numkit::ParamStore& store, const std::string& prefix,
                    const numkit::Tensor& x);

numkit::Tensor ffn(const numkit::ParamStore& store, const std::string& prefix,
                   const numkit::Tensor& x);

numkit::Tensor maybe_dropout(const numkit::Tensor& x, double rate,
                             bool training, Rng* rng);

} // namespace atd::nn
