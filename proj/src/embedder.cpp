#include "atd/embedder.hpp"

namespace atd::biencoder {

using numkit::ParamStore;
using numkit::Tensor;

void EmbedderConfig::validate() const {
  nn::BlockConfig block{d_model, n_heads, d_ff, dropout, scale_attention};
  block.validate();
  if (n_layers <= 0) throw ArgumentError("embedder: n_layers must be positive");
  if (vocab_size <= datakit::kReservedCount)
    throw ArgumentError("embedder: vocab_size must exceed the reserved ids");
  if (max_len < 2) throw ArgumentError("embedder: max_len must be >= 2");
}

nlohmann::json EmbedderConfig::to_json() const {
  return {{"d_model", d_model},       {"n_heads", n_heads},
          {"n_layers", n_layers},     {"vocab_size", vocab_size},
          {"max_len", max_len},       {"dropout", dropout},
          {"scale_attention", scale_attention},
          {"mean_pool", mean_pool},   {"d_ff", d_ff}};
}

EmbedderConfig EmbedderConfig::from_json(const nlohmann::json& j) {
  EmbedderConfig cfg;
  cfg.d_model = j.value("d_model", cfg.d_model);
  cfg.n_heads = j.value("n_heads", cfg.n_heads);
  cfg.n_layers = j.value("n_layers", cfg.n_layers);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.max_len = j.value("max_len", cfg.max_len);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.scale_attention = j.value("scale_attention", cfg.scale_attention);
  cfg.mean_pool = j.value("mean_pool", cfg.mean_pool);
  cfg.d_ff = j.value("d_ff", cfg.d_ff);
  return cfg;
}

double score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ArgumentError("score: embedding widths differ, " +
                        std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

namespace {

nn::BlockConfig block_of(const EmbedderConfig& cfg) {
  return {cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout,
          cfg.scale_attention};
}

} // namespace

Embedder::Embedder(const EmbedderConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

Embedder::Embedder(const EmbedderConfig& cfg, uint64_t init_seed)
    : Embedder(cfg) {
  Rng rng(mix_seed(init_seed, "embedder-init"));
  const nn::BlockConfig block = block_of(cfg_);
  params_.add_randn("tok_emb", {cfg_.vocab_size, cfg_.d_model}, rng, 0.05);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    nn::add_norm_params(params_, p + ".ln1", cfg_.d_model);
    nn::add_attention_params(params_, p + ".attn", block, rng);
    nn::add_norm_params(params_, p + ".ln2", cfg_.d_model);
    nn::add_ffn_params(params_, p + ".ffn", block, rng);
  }
  nn::add_norm_params(params_, "lnf", cfg_.d_model);
}

Tensor Embedder::embed_t(const ParamStore& store, const EmbedderConfig& cfg,
                         const datakit::TokenSeq& ids, bool training,
                         Rng* dropout_rng) {
  if (ids.empty()) throw ArgumentError("embed: empty input text");
  datakit::TokenSeq with_cls;
  with_cls.reserve(ids.size() + 1);
  with_cls.push_back(datakit::kClsId);
  with_cls.insert(with_cls.end(), ids.begin(), ids.end());
  if (static_cast<int>(with_cls.size()) > cfg.max_len)
    with_cls.resize(static_cast<size_t>(cfg.max_len));

  const nn::BlockConfig block = block_of(cfg);
  Tensor h = nn::embed_tokens(store.at("tok_emb"), with_cls, cfg.d_model);
  h = nn::maybe_dropout(h, cfg.dropout, training, dropout_rng);
  const numkit::KeySpan full{0, h.extent(0)};
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    Tensor a = nn::attention(store, p + ".attn", block,
                             nn::norm(store, p + ".ln1", h), h,
                             std::array{full}, /*causal=*/false);
    h = numkit::add(h, nn::maybe_dropout(a, cfg.dropout, training, dropout_rng));
    Tensor f = nn::ffn(store, p + ".ffn", nn::norm(store, p + ".ln2", h));
    h = numkit::add(h, nn::maybe_dropout(f, cfg.dropout, training, dropout_rng));
  }
  h = nn::norm(store, "lnf", h);

  Tensor pooled = cfg.mean_pool ? numkit::reduce_mean(h, 0)
                                : numkit::reshape(numkit::slice_rows(h, 0, 1),
                                                  {cfg.d_model});
  return pooled;
}

Tensor Embedder::embed_t(const datakit::TokenSeq& ids, bool training,
                         Rng* dropout_rng) const {
  return embed_t(params_, cfg_, ids, training, dropout_rng);
}

Embedding Embedder::embed(const datakit::TokenSeq& ids) const {
  numkit::NoGradGuard ng;
  Tensor e = embed_t(params_, cfg_, ids, /*training=*/false, nullptr);
  return {e.data().begin(), e.data().end()};
}

void Embedder::save(const std::string& path, const numkit::Adam* opt) const {
  std::vector<std::pair<std::string, Tensor>> tensors = params_.items();
  nlohmann::json meta;
  meta["kind"] = "embedder";
  meta["config"] = cfg_.to_json();
  meta["has_optimizer_state"] = opt != nullptr;
  if (opt) {
    auto state = opt->state_tensors();
    tensors.insert(tensors.end(), state.begin(), state.end());
  }
  numkit::save_checkpoint(path, tensors, meta);
}

Embedder Embedder::from_checkpoint(const numkit::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "embedder")
    throw DataError("checkpoint is not an embedder");
  EmbedderConfig cfg = EmbedderConfig::from_json(ckpt.meta.at("config"));
  Embedder embedder(cfg);
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("opt.", 0) == 0) continue;
    embedder.params_.add(
        name, numkit::Tensor::from_data(
                  t.shape(), {t.data().begin(), t.data().end()}, true));
  }
  return embedder;
}

Embedder Embedder::load(const std::string& path) {
  return from_checkpoint(numkit::load_checkpoint(path));
}

} // namespace atd::biencoder
