#include "atd/nn_blocks.hpp"

#include <cmath>

namespace atd::nn {

using numkit::KeySpan;
using numkit::ParamStore;
using numkit::Tensor;

void BlockConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0)
    throw ArgumentError("block config: d_model and n_heads must be positive");
  if (d_model % n_heads != 0)
    throw ArgumentError("block config: d_model (" + std::to_string(d_model) +
                        ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ArgumentError("block config: dropout must be in [0, 1)");
}

double BlockConfig::score_scale() const {
  return scale_attention ? 1.0 / std::sqrt(static_cast<double>(head_dim()))
                         : 1.0;
}

Tensor embed_tokens(const Tensor& table, const datakit::TokenSeq& ids,
                    int d_model) {
  Tensor emb = numkit::embedding_lookup(table, ids);
  const int64_t len = static_cast<int64_t>(ids.size());
  std::vector<double> pos(static_cast<size_t>(len * d_model));
  for (int64_t p = 0; p < len; ++p)
    for (int c = 0; c < d_model; ++c) {
      const double rate =
          std::pow(10000.0, -2.0 * static_cast<double>(c / 2) / d_model);
      const double angle = static_cast<double>(p) * rate;
      pos[static_cast<size_t>(p * d_model + c)] =
          (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return numkit::add(emb,
                     Tensor::from_data({len, d_model}, std::move(pos)));
}

void add_attention_params(ParamStore& store, const std::string& prefix,
                          const BlockConfig& cfg, Rng& rng) {
  const double std_in = 0.05;
  const int dh = cfg.head_dim();
  for (int h = 0; h < cfg.n_heads; ++h) {
    const std::string hs = std::to_string(h);
    store.add_randn(prefix + ".q" + hs, {cfg.d_model, dh}, rng, std_in);
    store.add_randn(prefix + ".k" + hs, {cfg.d_model, dh}, rng, std_in);
    store.add_randn(prefix + ".v" + hs, {cfg.d_model, dh}, rng, std_in);
  }
  store.add_randn(prefix + ".o", {cfg.d_model, cfg.d_model}, rng, std_in);
}

void add_norm_params(ParamStore& store, const std::string& prefix, int width) {
  store.add_full(prefix + ".g", {width}, 1.0);
  store.add_zeros(prefix + ".b", {width});
}

void add_ffn_params(ParamStore& store, const std::string& prefix,
                    const BlockConfig& cfg, Rng& rng) {
  const double std_in = 0.05;
  store.add_randn(prefix + ".w1", {cfg.d_model, cfg.ff_dim()}, rng, std_in);
  store.add_zeros(prefix + ".b1", {cfg.ff_dim()});
  store.add_randn(prefix + ".w2", {cfg.ff_dim(), cfg.d_model}, rng, std_in);
  store.add_zeros(prefix + ".b2", {cfg.d_model});
}

Tensor attention(const ParamStore& store, const std::string& prefix,
                 const BlockConfig& cfg, const Tensor& from,
                 const Tensor& memory, std::span<const KeySpan> spans,
                 bool causal, AttentionScores* scores_out) {
  if (from.extent(1) != cfg.d_model)
    throw ArgumentError("attention: input width " +
                        std::to_string(from.extent(1)) +
                        " does not match d_model " +
                        std::to_string(cfg.d_model));
  if (scores_out) scores_out->per_head.clear();
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(cfg.n_heads));
  for (int h = 0; h < cfg.n_heads; ++h) {
    const std::string hs = std::to_string(h);
    Tensor q = numkit::matmul(from, store.at(prefix + ".q" + hs));
    Tensor k = numkit::matmul(memory, store.at(prefix + ".k" + hs));
    Tensor v = numkit::matmul(memory, store.at(prefix + ".v" + hs));
    numkit::AttendResult att = numkit::attend(
        q, k, v, spans, causal, cfg.score_scale(), scores_out != nullptr);
    if (scores_out) scores_out->per_head.push_back(std::move(att.scores));
    heads.push_back(std::move(att.output));
  }
  Tensor merged = numkit::concat_cols(heads);
  return numkit::matmul(merged, store.at(prefix + ".o"));
}

Tensor norm(const ParamStore& store, const std::string& prefix,
            const Tensor& x) {
  return numkit::layer_norm(x, store.at(prefix + ".g"), store.at(prefix + ".b"));
}

Tensor ffn(const ParamStore& store, const std::string& prefix,
           const Tensor& x) {
  Tensor h = numkit::add_rowvec(numkit::matmul(x, store.at(prefix + ".w1")),
                                store.at(prefix + ".b1"));
  h = numkit::relu(h);
  return numkit::add_rowvec(numkit::matmul(h, store.at(prefix + ".w2")),
                            store.at(prefix + ".b2"));
}

Tensor maybe_dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (!training || rate == 0.0) return x;
  if (!rng) throw ArgumentError("dropout requested without an rng");
  return numkit::dropout(x, rate, *rng);
}

} // namespace atd::nn
