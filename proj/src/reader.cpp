#include "atd/reader.hpp"

#include <algorithm>

namespace atd::reader {

using numkit::KeySpan;
using numkit::ParamStore;
using numkit::Tensor;

void ReaderConfig::validate() const {
  nn::BlockConfig block{d_model, n_heads, d_ff, dropout, scale_attention};
  block.validate();
  if (n_enc_layers <= 0 || n_dec_layers <= 0)
    throw ArgumentError("reader: layer counts must be positive");
  if (vocab_size <= datakit::kReservedCount)
    throw ArgumentError("reader: vocab_size must exceed the reserved ids");
  if (max_input_len < 4)
    throw ArgumentError("reader: max_input_len must be >= 4");
}

nlohmann::json ReaderConfig::to_json() const {
  return {{"d_model", d_model},
          {"n_heads", n_heads},
          {"n_enc_layers", n_enc_layers},
          {"n_dec_layers", n_dec_layers},
          {"vocab_size", vocab_size},
          {"max_input_len", max_input_len},
          {"dropout", dropout},
          {"scale_attention", scale_attention},
          {"d_ff", d_ff}};
}

ReaderConfig ReaderConfig::from_json(const nlohmann::json& j) {
  ReaderConfig cfg;
  cfg.d_model = j.value("d_model", cfg.d_model);
  cfg.n_heads = j.value("n_heads", cfg.n_heads);
  cfg.n_enc_layers = j.value("n_enc_layers", cfg.n_enc_layers);
  cfg.n_dec_layers = j.value("n_dec_layers", cfg.n_dec_layers);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.max_input_len = j.value("max_input_len", cfg.max_input_len);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.scale_attention = j.value("scale_attention", cfg.scale_attention);
  cfg.d_ff = j.value("d_ff", cfg.d_ff);
  return cfg;
}

namespace {

nn::BlockConfig block_of(const ReaderConfig& cfg) {
  return {cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout,
          cfg.scale_attention};
}

// span order for attention reductions: sorted by passage id, so the forward
// pass is bit-identical under any permutation of the passage list
std::vector<KeySpan> canonical_spans(const std::vector<Span>& spans) {
  std::vector<const Span*> by_pid;
  by_pid.reserve(spans.size());
  for (const Span& s : spans) by_pid.push_back(&s);
  std::sort(by_pid.begin(), by_pid.end(),
            [](const Span* a, const Span* b) { return a->pid < b->pid; });
  std::vector<KeySpan> out;
  out.reserve(spans.size());
  for (const Span* s : by_pid) out.push_back({s->begin, s->end});
  return out;
}

} // namespace

ReaderModel::ReaderModel(const ReaderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

ReaderModel::ReaderModel(const ReaderConfig& cfg, uint64_t init_seed)
    : ReaderModel(cfg) {
  Rng rng(mix_seed(init_seed, "reader-init"));
  const nn::BlockConfig block = block_of(cfg_);
  params_.add_randn("tok_emb", {cfg_.vocab_size, cfg_.d_model}, rng, 0.05);
  for (int l = 0; l < cfg_.n_enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    nn::add_norm_params(params_, p + ".ln1", cfg_.d_model);
    nn::add_attention_params(params_, p + ".attn", block, rng);
    nn::add_norm_params(params_, p + ".ln2", cfg_.d_model);
    nn::add_ffn_params(params_, p + ".ffn", block, rng);
  }
  nn::add_norm_params(params_, "enc.lnf", cfg_.d_model);
  for (int l = 0; l < cfg_.n_dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    nn::add_norm_params(params_, p + ".ln1", cfg_.d_model);
    nn::add_attention_params(params_, p + ".self", block, rng);
    nn::add_norm_params(params_, p + ".ln2", cfg_.d_model);
    nn::add_attention_params(params_, p + ".cross", block, rng);
    nn::add_norm_params(params_, p + ".ln3", cfg_.d_model);
    nn::add_ffn_params(params_, p + ".ffn", block, rng);
  }
  nn::add_norm_params(params_, "dec.lnf", cfg_.d_model);
}

EncodedBatch ReaderModel::encode_inputs(
    const ParamStore& store, const ReaderConfig& cfg, const TokenSeq& question,
    std::span<const TokenizedPassage> passages, bool training,
    Rng* dropout_rng) {
  if (passages.empty())
    throw ArgumentError("encode_inputs: empty support passage list");
  const nn::BlockConfig block = block_of(cfg);

  std::vector<Tensor> encoded;
  encoded.reserve(passages.size());
  std::vector<Span> spans;
  spans.reserve(passages.size());
  int64_t offset = 0;
  for (const TokenizedPassage& p : passages) {
    TokenSeq seg;
    seg.reserve(question.size() + p.tokens.size());
    seg.insert(seg.end(), question.begin(), question.end());
    seg.insert(seg.end(), p.tokens.begin(), p.tokens.end());
    // passage tail beyond the cap is dropped, the question prefix never is
    if (static_cast<int>(seg.size()) > cfg.max_input_len)
      seg.resize(static_cast<size_t>(cfg.max_input_len));
    if (seg.empty())
      throw ArgumentError("encode_inputs: empty segment for passage " + p.pid);

    Tensor h = nn::embed_tokens(store.at("tok_emb"), seg, cfg.d_model);
    h = nn::maybe_dropout(h, cfg.dropout, training, dropout_rng);
    const KeySpan full{0, h.extent(0)};
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
      const std::string pre = "enc" + std::to_string(l);
      Tensor a = nn::attention(store, pre + ".attn", block,
                               nn::norm(store, pre + ".ln1", h), h,
                               std::array{full}, /*causal=*/false);
      h = numkit::add(h, nn::maybe_dropout(a, cfg.dropout, training, dropout_rng));
      Tensor f = nn::ffn(store, pre + ".ffn", nn::norm(store, pre + ".ln2", h));
      h = numkit::add(h, nn::maybe_dropout(f, cfg.dropout, training, dropout_rng));
    }
    h = nn::norm(store, "enc.lnf", h);

    const int64_t len = h.extent(0);
    Span span;
    span.pid = p.pid;
    span.begin = offset;
    span.end = offset + len;
    span.text_begin =
        std::min(offset + static_cast<int64_t>(question.size()) + p.text_begin,
                 span.end);
    spans.push_back(std::move(span));
    encoded.push_back(std::move(h));
    offset += len;
  }

  EncodedBatch batch;
  batch.hidden = numkit::concat_rows(encoded);
  batch.spans = std::move(spans);
  batch.pad_mask.assign(static_cast<size_t>(offset), 0);
  return batch;
}

EncodedBatch ReaderModel::encode_inputs(
    const TokenSeq& question, std::span<const TokenizedPassage> passages) const {
  return encode_inputs(params_, cfg_, question, passages, false, nullptr);
}

ReaderModel::DecodeOut ReaderModel::decode(const ParamStore& store,
                                           const ReaderConfig& cfg,
                                           const TokenSeq& dec_ids,
                                           const EncodedBatch& enc,
                                           bool training, Rng* dropout_rng,
                                           bool want_scores) {
  const nn::BlockConfig block = block_of(cfg);
  const std::vector<KeySpan> memory_spans = canonical_spans(enc.spans);

  DecodeOut out;
  Tensor h = nn::embed_tokens(store.at("tok_emb"), dec_ids, cfg.d_model);
  h = nn::maybe_dropout(h, cfg.dropout, training, dropout_rng);
  const KeySpan self_span{0, h.extent(0)};
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string pre = "dec" + std::to_string(l);
    Tensor a = nn::attention(store, pre + ".self", block,
                             nn::norm(store, pre + ".ln1", h), h,
                             std::array{self_span}, /*causal=*/true);
    h = numkit::add(h, nn::maybe_dropout(a, cfg.dropout, training, dropout_rng));

    nn::AttentionScores scores;
    Tensor c = nn::attention(store, pre + ".cross", block,
                             nn::norm(store, pre + ".ln2", h), enc.hidden,
                             memory_spans, /*causal=*/false,
                             want_scores ? &scores : nullptr);
    if (want_scores) out.cross_scores.push_back(std::move(scores));
    h = numkit::add(h, nn::maybe_dropout(c, cfg.dropout, training, dropout_rng));

    Tensor f = nn::ffn(store, pre + ".ffn", nn::norm(store, pre + ".ln3", h));
    h = numkit::add(h, nn::maybe_dropout(f, cfg.dropout, training, dropout_rng));
  }
  out.hidden = nn::norm(store, "dec.lnf", h);
  return out;
}

Tensor ReaderModel::logits_of(const ParamStore& store,
                              const Tensor& dec_hidden) {
  // lm head tied to the embedding table
  return numkit::matmul(dec_hidden, numkit::transpose(store.at("tok_emb")));
}

Tensor ReaderModel::answer_loss(const ParamStore& store,
                                const ReaderConfig& cfg,
                                const TokenSeq& question,
                                std::span<const TokenizedPassage> passages,
                                const TokenSeq& answer, bool training,
                                Rng* dropout_rng) {
  if (answer.empty())
    throw ArgumentError("answer_loss: empty answer token sequence");
  EncodedBatch enc =
      encode_inputs(store, cfg, question, passages, training, dropout_rng);
  TokenSeq dec_in{datakit::kBosId};
  dec_in.insert(dec_in.end(), answer.begin(), answer.end());
  std::vector<int32_t> targets(answer.begin(), answer.end());
  targets.push_back(datakit::kEosId);
  DecodeOut dec =
      decode(store, cfg, dec_in, enc, training, dropout_rng, false);
  return numkit::cross_entropy_rows(logits_of(store, dec.hidden), targets);
}

Tensor ReaderModel::answer_loss(const TokenSeq& question,
                                std::span<const TokenizedPassage> passages,
                                const TokenSeq& answer) const {
  return answer_loss(params_, cfg_, question, passages, answer, false,
                     nullptr);
}

TokenSeq ReaderModel::greedy_decode(const TokenSeq& question,
                                    std::span<const TokenizedPassage> passages,
                                    int max_len) const {
  if (max_len < 0) throw ArgumentError("greedy_decode: max_len must be >= 0");
  numkit::NoGradGuard ng;
  EncodedBatch enc =
      encode_inputs(params_, cfg_, question, passages, false, nullptr);
  TokenSeq dec_in{datakit::kBosId};
  TokenSeq emitted;
  while (static_cast<int>(emitted.size()) < max_len) {
    DecodeOut dec = decode(params_, cfg_, dec_in, enc, false, nullptr, false);
    Tensor logits = logits_of(params_, dec.hidden);
    const int64_t last = logits.extent(0) - 1;
    const int64_t v = logits.extent(1);
    const double* row = logits.data().data() + last * v;
    int32_t best = 0;
    for (int64_t j = 1; j < v; ++j)
      if (row[j] > row[best]) best = static_cast<int32_t>(j);
    if (best == datakit::kEosId) break;
    emitted.push_back(best);
    dec_in.push_back(best);
  }
  return emitted;
}

AttnRecord ReaderModel::record_attention(
    const std::string& qid, const TokenSeq& question,
    std::span<const TokenizedPassage> passages, const TokenSeq& answer) const {
  if (answer.empty())
    throw ArgumentError("record_attention: empty answer token sequence");
  numkit::NoGradGuard ng;
  EncodedBatch enc =
      encode_inputs(params_, cfg_, question, passages, false, nullptr);
  TokenSeq dec_in{datakit::kBosId};
  dec_in.insert(dec_in.end(), answer.begin(), answer.end());
  DecodeOut dec = decode(params_, cfg_, dec_in, enc, false, nullptr, true);

  AttnRecord rec;
  rec.qid = qid;
  rec.t_out = static_cast<int64_t>(answer.size()); // rows generating answers
  rec.t_in = enc.hidden.extent(0);
  rec.n_layers = cfg_.n_dec_layers;
  rec.n_heads = cfg_.n_heads;
  rec.spans = enc.spans;
  rec.alpha.resize(static_cast<size_t>(rec.t_out * rec.t_in * rec.n_layers *
                                       rec.n_heads));
  for (int k = 0; k < rec.n_layers; ++k) {
    const auto& per_head = dec.cross_scores[static_cast<size_t>(k)].per_head;
    for (int h = 0; h < rec.n_heads; ++h) {
      const std::vector<double>& s = per_head[static_cast<size_t>(h)];
      for (int64_t i = 0; i < rec.t_out; ++i)
        for (int64_t j = 0; j < rec.t_in; ++j)
          rec.alpha[rec.index(i, j, k, h)] =
              s[static_cast<size_t>(i * rec.t_in + j)];
    }
  }
  return rec;
}

void ReaderModel::save(const std::string& path) const {
  nlohmann::json meta;
  meta["kind"] = "reader";
  meta["config"] = cfg_.to_json();
  numkit::save_checkpoint(path, params_.items(), meta);
}

ReaderModel ReaderModel::load(const std::string& path) {
  numkit::Checkpoint ckpt = numkit::load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "reader")
    throw DataError("checkpoint " + path + " is not a reader");
  ReaderModel model(ReaderConfig::from_json(ckpt.meta.at("config")));
  for (const auto& [name, t] : ckpt.tensors)
    model.params_.add(name,
                      Tensor::from_data(t.shape(),
                                        {t.data().begin(), t.data().end()},
                                        true));
  return model;
}

} // namespace atd::reader
