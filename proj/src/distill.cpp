#include "atd/distill.hpp"

#include <algorithm>
#include <cmath>

#include "atd/io_util.hpp"
#include "atd/ops.hpp"
#include "atd/parallel.hpp"

namespace atd::distill {

using numkit::ParamStore;
using numkit::Tensor;

void LossSpec::validate() const {
  if (kind == LossKind::max_margin && gamma <= 0.0)
    throw ArgumentError("max-margin loss requires gamma > 0");
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "kl") return LossKind::kl;
  if (name == "mse") return LossKind::mse;
  if (name == "margin" || name == "max-margin") return LossKind::max_margin;
  throw ArgumentError("unknown loss: " + name +
                      " (expected kl, mse, or margin)");
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kl: return "kl";
    case LossKind::mse: return "mse";
    case LossKind::max_margin: return "margin";
  }
  return "?";
}

numkit::Tensor loss_kl(const Tensor& scores,
                       const std::vector<double>& targets) {
  if (targets.size() < 2)
    throw ArgumentError("loss_kl: degenerate batch, needs >= 2 passages");
  return numkit::kl_to_targets(scores, targets);
}

numkit::Tensor loss_mse(const Tensor& scores,
                        const std::vector<double>& targets) {
  if (targets.empty()) throw ArgumentError("loss_mse: empty batch");
  return numkit::mse_to_targets(scores, targets);
}

numkit::Tensor loss_margin(const Tensor& scores,
                           const std::vector<double>& targets, double gamma) {
  if (targets.size() < 2)
    throw ArgumentError("loss_margin: degenerate batch, needs >= 2 passages");
  return numkit::margin_ranking(scores, targets, gamma);
}

numkit::Tensor loss_of(LossSpec spec, const Tensor& scores,
                       const std::vector<double>& targets) {
  switch (spec.kind) {
    case LossKind::kl: return loss_kl(scores, targets);
    case LossKind::mse: return loss_mse(scores, targets);
    case LossKind::max_margin:
      return loss_margin(scores, targets, spec.gamma);
  }
  throw ArgumentError("loss_of: bad loss kind");
}

std::string MonitorEntry::to_json_line() const {
  return "{\"epoch\":" + std::to_string(epoch) +
         ",\"inversions\":" + g17(inversions) + ",\"overlap\":" +
         g17(overlap) + ",\"coverage_depth\":" + g17(coverage_depth) + "}";
}

namespace {

Tensor example_scores_t(const ParamStore& store,
                        const biencoder::EmbedderConfig& cfg,
                        const DistillExample& ex, bool training,
                        Rng* dropout_rng) {
  Tensor q_emb =
      biencoder::Embedder::embed_t(store, cfg, ex.question, training,
                                   dropout_rng);
  std::vector<Tensor> scores;
  scores.reserve(ex.passages.size());
  for (const datakit::TokenSeq& p : ex.passages) {
    Tensor p_emb =
        biencoder::Embedder::embed_t(store, cfg, p, training, dropout_rng);
    scores.push_back(numkit::dot(q_emb, p_emb));
  }
  return numkit::stack_scalars(scores);
}

} // namespace

RelevanceScores retriever_scores(const biencoder::Embedder& embedder,
                                 const DistillExample& ex) {
  numkit::NoGradGuard ng;
  Tensor s = example_scores_t(embedder.params(), embedder.config(), ex,
                              /*training=*/false, nullptr);
  RelevanceScores out;
  out.qid = ex.qid;
  for (size_t i = 0; i < ex.pids.size(); ++i)
    out.add(ex.pids[i], s.data()[i]);
  return out;
}

RetrieverTrainResult train_retriever(biencoder::Embedder& embedder,
                                     numkit::Adam& opt,
                                     const std::vector<DistillExample>& data,
                                     const RetrieverTrainConfig& cfg) {
  cfg.loss.validate();
  if (cfg.batch_size < 1)
    throw ArgumentError("train_retriever: batch_size must be >= 1");
  if (cfg.max_epochs < 0)
    throw ArgumentError("train_retriever: max_epochs must be >= 0");
  if (data.empty()) throw ArgumentError("train_retriever: no questions");
  for (const DistillExample& ex : data) {
    if (ex.pids.size() != ex.passages.size() ||
        ex.pids.size() != ex.targets.size())
      throw DataError("train_retriever: inconsistent example " + ex.qid);
    const size_t min_size = cfg.loss.kind == LossKind::mse ? 1 : 2;
    if (ex.pids.size() < min_size)
      throw ArgumentError("train_retriever: question " + ex.qid +
                          " has too few passages for the loss");
  }

  RetrieverTrainResult result;
  const int threads = resolve_threads(cfg.threads);

  auto monitors_now = [&](int epoch) {
    MonitorEntry entry;
    entry.epoch = epoch;
    std::vector<evalkit::Monitors> per_q(data.size());
    parallel_for(data.size(), threads, [&](size_t i) {
      RelevanceScores teacher;
      teacher.qid = data[i].qid;
      for (size_t p = 0; p < data[i].pids.size(); ++p)
        teacher.add(data[i].pids[p], data[i].targets[p]);
      RelevanceScores student = retriever_scores(embedder, data[i]);
      per_q[i] = evalkit::ranking_monitors(teacher, student, cfg.monitor_k);
    });
    for (const evalkit::Monitors& m : per_q) {
      entry.inversions += static_cast<double>(m.inversions);
      entry.overlap += m.overlap;
      entry.coverage_depth += static_cast<double>(m.coverage_depth);
    }
    const double n = static_cast<double>(data.size());
    entry.inversions /= n;
    entry.overlap /= n;
    entry.coverage_depth /= n;
    return entry;
  };

  Rng order_rng(mix_seed(cfg.seed, "retriever-order"));
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_overlap = -1.0;
  int since_best = 0;
  uint64_t example_counter = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const size_t nq = end - start;
      const double loss_scale =
          cfg.mean_over_questions ? 1.0 / static_cast<double>(nq) : 1.0;

      std::vector<ParamStore> shadows;
      shadows.reserve(static_cast<size_t>(threads));
      for (int t = 0; t < threads; ++t)
        shadows.push_back(embedder.params().shadow());

      std::vector<double> losses(nq, 0.0);
      const uint64_t batch_base = example_counter;
      try {
        parallel_chunks(nq, threads, [&](int worker, size_t lo, size_t hi) {
          ParamStore& store = shadows[static_cast<size_t>(worker)];
          for (size_t b = lo; b < hi; ++b) {
            const DistillExample& ex = data[order[start + b]];
            Rng drop_rng(
                mix_seed(cfg.seed, "retriever-dropout", batch_base + b));
            Tensor s = example_scores_t(store, embedder.config(), ex,
                                        /*training=*/true, &drop_rng);
            Tensor loss = loss_of(cfg.loss, s, ex.targets);
            losses[b] = loss.item();
            numkit::backward(numkit::scale(loss, loss_scale));
          }
        });
      } catch (const DataError& e) {
        throw DivergenceError(std::string("retriever training failed: ") +
                                  e.what(),
                              static_cast<long long>(opt.steps_done()));
      }
      example_counter += nq;

      embedder.params().zero_grad();
      for (const ParamStore& shadow : shadows)
        embedder.params().accumulate_grads_from(shadow);

      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      batch_loss *= loss_scale;
      if (!std::isfinite(batch_loss))
        throw DivergenceError("retriever loss is non-finite",
                              static_cast<long long>(opt.steps_done()));
      result.loss_curve.push_back(batch_loss);

      opt.step();
      embedder.params().zero_grad();
    }

    result.log.push_back(monitors_now(epoch));
    result.epochs_run = epoch + 1;

    const double overlap = result.log.back().overlap;
    if (overlap > best_overlap + cfg.min_delta) {
      best_overlap = std::max(best_overlap, overlap);
      since_best = 0;
    } else {
      best_overlap = std::max(best_overlap, overlap);
      if (++since_best >= cfg.patience) {
        result.saturated = true;
        break;
      }
    }
  }
  return result;
}

} // namespace atd::distill
