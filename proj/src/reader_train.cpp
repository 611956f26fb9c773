#include <algorithm>
#include <cmath>

#include "atd/io_util.hpp"
#include "atd/parallel.hpp"
#include "atd/reader.hpp"

namespace atd::reader {

using numkit::ParamStore;
using numkit::Tensor;

ReaderTrainResult train_reader(ReaderModel& model,
                               const std::vector<ReaderExample>& examples,
                               const ReaderTrainConfig& cfg) {
  if (cfg.steps < 0) throw ArgumentError("train_reader: steps must be >= 0");
  if (cfg.batch_size < 1)
    throw ArgumentError("train_reader: batch_size must be >= 1");
  if (examples.empty())
    throw ArgumentError("train_reader: no training examples");
  for (const ReaderExample& ex : examples) {
    if (ex.answer.empty())
      throw ArgumentError("train_reader: example " + ex.qid +
                          " has an empty answer");
    if (ex.passages.empty())
      throw ArgumentError("train_reader: example " + ex.qid +
                          " has no support passages");
  }

  ReaderTrainResult result;
  if (cfg.steps == 0) return result;

  numkit::Adam opt(model.params(),
                   {.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  Rng order_rng(mix_seed(cfg.seed, "reader-order"));
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  order_rng.shuffle(order);
  size_t cursor = 0;

  std::vector<double> best_params;
  const int threads = resolve_threads(cfg.threads);

  auto evaluate = [&](int step) {
    if (!cfg.validation_metric) return;
    const double metric = cfg.validation_metric(model);
    if (result.best_step < 0 || metric > result.best_metric) {
      result.best_metric = metric;
      result.best_step = step;
      best_params.clear();
      for (const auto& [name, t] : model.params().items())
        best_params.insert(best_params.end(), t.data().begin(),
                           t.data().end());
    }
  };

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<size_t> batch;
    batch.reserve(static_cast<size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::vector<ParamStore> shadows;
    shadows.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) shadows.push_back(model.params().shadow());

    std::vector<double> losses(batch.size(), 0.0);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    try {
      parallel_chunks(batch.size(), threads,
                      [&](int worker, size_t begin, size_t end) {
                        ParamStore& store = shadows[static_cast<size_t>(worker)];
                        for (size_t b = begin; b < end; ++b) {
                          const ReaderExample& ex = examples[batch[b]];
                          Rng drop_rng(mix_seed(
                              cfg.seed, "reader-dropout",
                              static_cast<uint64_t>(step) * 1000003ull + b));
                          Tensor loss = ReaderModel::answer_loss(
                              store, model.config(), ex.question, ex.passages,
                              ex.answer, /*training=*/true, &drop_rng);
                          losses[b] = loss.item();
                          numkit::backward(numkit::scale(loss, inv_batch));
                        }
                      });
    } catch (const DataError& e) {
      throw DivergenceError(std::string("reader training failed: ") + e.what(),
                            step);
    }

    model.params().zero_grad();
    for (const ParamStore& shadow : shadows)
      model.params().accumulate_grads_from(shadow);

    double mean_loss = 0.0;
    for (double l : losses) mean_loss += l;
    mean_loss *= inv_batch;
    if (!std::isfinite(mean_loss))
      throw DivergenceError("reader loss is non-finite", step);
    result.loss_curve.push_back(mean_loss);

    opt.step();
    model.params().zero_grad();

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0)
      evaluate(step + 1);
  }

  if (cfg.validation_metric) {
    evaluate(cfg.steps);
    // keep the best checkpoint seen
    size_t off = 0;
    for (auto& [name, t] : model.params().items()) {
      auto dst = const_cast<Tensor&>(t).mutable_data();
      std::copy_n(best_params.begin() + static_cast<long>(off), dst.size(),
                  dst.begin());
      off += dst.size();
    }
  }
  return result;
}

// ---- attention dump io ------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'A', 'T', 'R', 'C'};
constexpr uint32_t kVersion = 1;
} // namespace

void save_attn_records(const std::string& path,
                       std::span<const AttnRecord> records) {
  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  put_u64(blob, records.size());
  for (const AttnRecord& rec : records) {
    put_u32(blob, static_cast<uint32_t>(rec.qid.size()));
    blob += rec.qid;
    put_u64(blob, static_cast<uint64_t>(rec.t_out));
    put_u64(blob, static_cast<uint64_t>(rec.t_in));
    put_u32(blob, static_cast<uint32_t>(rec.n_layers));
    put_u32(blob, static_cast<uint32_t>(rec.n_heads));
    put_u32(blob, static_cast<uint32_t>(rec.spans.size()));
    for (const Span& s : rec.spans) {
      put_u32(blob, static_cast<uint32_t>(s.pid.size()));
      blob += s.pid;
      put_u64(blob, static_cast<uint64_t>(s.begin));
      put_u64(blob, static_cast<uint64_t>(s.end));
      put_u64(blob, static_cast<uint64_t>(s.text_begin));
    }
    for (double v : rec.alpha) put_f32(blob, static_cast<float>(v));
  }
  write_file(path, blob);
}

std::vector<AttnRecord> load_attn_records(const std::string& path) {
  const std::string blob = read_file(path);
  ByteReader r(blob, path);
  if (r.take(4) != std::string_view(kMagic, 4))
    throw DataError("not an attention dump: " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("unsupported attention dump version in " + path);
  const uint64_t count = r.u64();
  std::vector<AttnRecord> out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    AttnRecord rec;
    rec.qid = std::string(r.take(r.u32()));
    rec.t_out = static_cast<int64_t>(r.u64());
    rec.t_in = static_cast<int64_t>(r.u64());
    rec.n_layers = static_cast<int>(r.u32());
    rec.n_heads = static_cast<int>(r.u32());
    const uint32_t n_spans = r.u32();
    rec.spans.reserve(n_spans);
    for (uint32_t s = 0; s < n_spans; ++s) {
      Span span;
      span.pid = std::string(r.take(r.u32()));
      span.begin = static_cast<int64_t>(r.u64());
      span.end = static_cast<int64_t>(r.u64());
      span.text_begin = static_cast<int64_t>(r.u64());
      rec.spans.push_back(std::move(span));
    }
    const size_t n =
        static_cast<size_t>(rec.t_out * rec.t_in * rec.n_layers * rec.n_heads);
    rec.alpha.resize(n);
    for (size_t a = 0; a < n; ++a) rec.alpha[a] = static_cast<double>(r.f32());
    out.push_back(std::move(rec));
  }
  if (!r.done()) throw DataError("trailing bytes in attention dump: " + path);
  return out;
}

} // namespace atd::reader
