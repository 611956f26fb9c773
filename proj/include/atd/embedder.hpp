#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "atd/checkpoint.hpp"
#include "atd/nn_blocks.hpp"
#include "atd/optim.hpp"

namespace atd::biencoder {

struct EmbedderConfig {
  int d_model = 32; // also the output embedding width
  int n_heads = 2;
  int n_layers = 2;
  int vocab_size = 0;
  int max_len = 64;
  double dropout = 0.1;
  bool scale_attention = false;
  bool mean_pool = false; // default is first-token (CLS) pooling
  int d_ff = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static EmbedderConfig from_json(const nlohmann::json& j);
};

using Embedding = std::vector<double>;

// Exact inner product of two equal-width embeddings.
double score(std::span<const double> a, std::span<const double> b);

// One shared encoder for questions and passages; there are no role-specific
// parameters anywhere, embed(t) depends only on the token sequence.
class Embedder {
public:
  Embedder(const EmbedderConfig& cfg, uint64_t init_seed);

  const EmbedderConfig& config() const { return cfg_; }
  numkit::ParamStore& params() { return params_; }
  const numkit::ParamStore& params() const { return params_; }

  // Differentiable path; a CLS token is prepended, input truncated to
  // max_len. `store` lets data-parallel workers run against shadow params.
  static numkit::Tensor embed_t(const numkit::ParamStore& store,
                                const EmbedderConfig& cfg,
                                const datakit::TokenSeq& ids, bool training,
                                Rng* dropout_rng);
  numkit::Tensor embed_t(const datakit::TokenSeq& ids, bool training,
                         Rng* dropout_rng) const;

  // Inference: no tape, dropout off.
  Embedding embed(const datakit::TokenSeq& ids) const;

  void save(const std::string& path, const numkit::Adam* opt = nullptr) const;
  static Embedder from_checkpoint(const numkit::Checkpoint& ckpt);
  static Embedder load(const std::string& path);

private:
  Embedder(const EmbedderConfig& cfg); // params filled by load
  EmbedderConfig cfg_;
  numkit::ParamStore params_;
};

} // namespace atd::biencoder
