#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "atd/checkpoint.hpp"
#include "atd/data.hpp"
#include "atd/nn_blocks.hpp"
#include "atd/optim.hpp"

namespace atd::reader {

using datakit::TokenSeq;
using datakit::TokenizedPassage;

struct ReaderConfig {
  int d_model = 32;
  int n_heads = 2;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int vocab_size = 0;
  int max_input_len = 64; // cap on each question + passage segment
  double dropout = 0.1;
  bool scale_attention = false;
  int d_ff = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ReaderConfig from_json(const nlohmann::json& j);
};

struct Span {
  std::string pid;
  int64_t begin = 0;
  int64_t end = 0;
  int64_t text_begin = 0; // first context-text position, for restricted pooling
};

struct EncodedBatch {
  numkit::Tensor hidden; // (sum of segment lengths) x d
  std::vector<Span> spans;
  std::vector<uint8_t> pad_mask; // per row; segments are packed, so all zero
};

// Pre-softmax cross-attention scores of a teacher-forced pass, one value per
// (output token, input token, decoder layer, head).
struct AttnRecord {
  std::string qid;
  int64_t t_out = 0;
  int64_t t_in = 0;
  int n_layers = 0;
  int n_heads = 0;
  std::vector<Span> spans;
  std::vector<double> alpha;

  size_t index(int64_t i, int64_t j, int k, int h) const {
    return static_cast<size_t>(((i * t_in + j) * n_layers + k) * n_heads + h);
  }
  double at(int64_t i, int64_t j, int k, int h) const {
    return alpha[index(i, j, k, h)];
  }
};

// Sequence-to-sequence reader: every (question, passage) segment is encoded
// independently with shared weights and per-segment positions, the decoder
// attends over the row-concatenation of all segments. The lm head is tied to
// the token embedding table.
class ReaderModel {
public:
  ReaderModel(const ReaderConfig& cfg, uint64_t init_seed);

  const ReaderConfig& config() const { return cfg_; }
  numkit::ParamStore& params() { return params_; }
  const numkit::ParamStore& params() const { return params_; }

  // Static variants run against an explicit store so trainer workers can use
  // parameter shadows.
  static EncodedBatch encode_inputs(const numkit::ParamStore& store,
                                    const ReaderConfig& cfg,
                                    const TokenSeq& question,
                                    std::span<const TokenizedPassage> passages,
                                    bool training = false,
                                    Rng* dropout_rng = nullptr);
  EncodedBatch encode_inputs(const TokenSeq& question,
                             std::span<const TokenizedPassage> passages) const;

  // Mean token cross-entropy of the gold answer under teacher forcing.
  static numkit::Tensor answer_loss(const numkit::ParamStore& store,
                                    const ReaderConfig& cfg,
                                    const TokenSeq& question,
                                    std::span<const TokenizedPassage> passages,
                                    const TokenSeq& answer, bool training,
                                    Rng* dropout_rng);
  numkit::Tensor answer_loss(const TokenSeq& question,
                             std::span<const TokenizedPassage> passages,
                             const TokenSeq& answer) const;

  // Argmax decoding, ties to the lowest token id, stops at EOS or max_len.
  TokenSeq greedy_decode(const TokenSeq& question,
                         std::span<const TokenizedPassage> passages,
                         int max_len) const;

  // Teacher-forced pass over the gold answer with dropout off; records the
  // pre-softmax cross-attention scores of every decoder layer and head for
  // the rows that generate answer tokens.
  AttnRecord record_attention(const std::string& qid, const TokenSeq& question,
                              std::span<const TokenizedPassage> passages,
                              const TokenSeq& answer) const;

  void save(const std::string& path) const;
  static ReaderModel load(const std::string& path);

private:
  explicit ReaderModel(const ReaderConfig& cfg);

  struct DecodeOut {
    numkit::Tensor hidden; // t_dec x d
    std::vector<nn::AttentionScores> cross_scores; // per layer, when recording
  };
  static DecodeOut decode(const numkit::ParamStore& store,
                          const ReaderConfig& cfg, const TokenSeq& dec_ids,
                          const EncodedBatch& enc, bool training,
                          Rng* dropout_rng, bool want_scores);
  static numkit::Tensor logits_of(const numkit::ParamStore& store,
                                  const numkit::Tensor& dec_hidden);

  ReaderConfig cfg_;
  numkit::ParamStore params_;
};

// Training ----------------------------------------------------------------

struct ReaderExample {
  std::string qid;
  TokenSeq question;
  std::vector<TokenizedPassage> passages;
  TokenSeq answer;
};

struct ReaderTrainConfig {
  int steps = 500;
  double lr = 1e-4;
  int batch_size = 8;
  double clip_norm = 1.0;
  uint64_t seed = 0;
  int threads = 0;
  // When set, evaluated every eval_every steps (and once at the end); the
  // parameters of the best evaluation are kept.
  int eval_every = 0;
  std::function<double(const ReaderModel&)> validation_metric;
};

struct ReaderTrainResult {
  std::vector<double> loss_curve;
  double best_metric = 0.0;
  int best_step = -1;
};

ReaderTrainResult train_reader(ReaderModel& model,
                               const std::vector<ReaderExample>& examples,
                               const ReaderTrainConfig& cfg);

// Attention dump file: "ATRC" magic, u32 version, u64 record count, then per
// record qid, answer_len, layers, heads, t_in, spans and the alpha payload as
// little-endian f32.
void save_attn_records(const std::string& path,
                       std::span<const AttnRecord> records);
std::vector<AttnRecord> load_attn_records(const std::string& path);

} // namespace atd::reader
