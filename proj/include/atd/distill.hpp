#pragma once

#include <string>
#include <vector>

#include "atd/embedder.hpp"
#include "atd/metrics.hpp"
#include "atd/scores.hpp"

namespace atd::distill {

enum class LossKind { kl, mse, max_margin };

struct LossSpec {
  LossKind kind = LossKind::kl;
  double gamma = 1.0; // margin for max_margin

  void validate() const;
};

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

// The three teacher-matching objectives. `scores` is the differentiable
// retriever output over one support set; `targets` are frozen teacher values.
numkit::Tensor loss_kl(const numkit::Tensor& scores,
                       const std::vector<double>& targets);
numkit::Tensor loss_mse(const numkit::Tensor& scores,
                        const std::vector<double>& targets);
numkit::Tensor loss_margin(const numkit::Tensor& scores,
                           const std::vector<double>& targets, double gamma);
numkit::Tensor loss_of(LossSpec spec, const numkit::Tensor& scores,
                       const std::vector<double>& targets);

// One question's distillation inputs: token sequences plus teacher scores,
// all in the same passage order.
struct DistillExample {
  std::string qid;
  datakit::TokenSeq question;
  std::vector<std::string> pids;
  std::vector<datakit::TokenSeq> passages;
  std::vector<double> targets;
};

struct RetrieverTrainConfig {
  LossSpec loss;
  double lr = 5e-5;
  int batch_size = 64;
  double clip_norm = 1.0;
  int max_epochs = 16;
  uint64_t seed = 0;
  int threads = 0;
  // Per-epoch teacher-agreement monitors; training stops early once top-k
  // overlap improves by less than min_delta over `patience` evaluations.
  int monitor_k = 10;
  double min_delta = 0.005;
  int patience = 3;
  // Loss per batch is the mean over its questions (each question's own loss
  // is the plain sum its formula defines); set false to sum instead.
  bool mean_over_questions = true;
};

struct MonitorEntry {
  int epoch = 0;
  double inversions = 0.0;
  double overlap = 0.0;
  double coverage_depth = 0.0;

  std::string to_json_line() const;
};

struct RetrieverTrainResult {
  std::vector<MonitorEntry> log;
  std::vector<double> loss_curve; // per step
  int epochs_run = 0;
  bool saturated = false;
};

// Fits the embedder to the teacher scores. The optimizer is owned by the
// caller so its moments survive across pipeline rounds.
RetrieverTrainResult train_retriever(biencoder::Embedder& embedder,
                                     numkit::Adam& opt,
                                     const std::vector<DistillExample>& data,
                                     const RetrieverTrainConfig& cfg);

// Retriever-side scores for one example with the current parameters.
RelevanceScores retriever_scores(const biencoder::Embedder& embedder,
                                 const DistillExample& ex);

} // namespace atd::distill
