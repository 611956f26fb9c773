#include "atd/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atd/ops.hpp"

namespace atd::aggregate {

Scheme scheme_from_int(int value) {
  if (value < 0 || value > 5)
    throw ArgumentError("aggregation scheme must be in 0..5, got " +
                        std::to_string(value));
  return static_cast<Scheme>(value);
}

int scheme_to_int(Scheme scheme) { return static_cast<int>(scheme); }

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::mean_tokens_layers_heads: return "mean-jkh";
    case Scheme::max_token_mean_rest: return "maxj-mean-kh";
    case Scheme::mean_all_outputs: return "mean-ijkh";
    case Scheme::mean_upper_layers: return "mean-upper-layers";
    case Scheme::max_layer_mean_rest: return "maxk-mean-jh";
    case Scheme::max_head_mean_rest: return "maxh-mean-jk";
  }
  return "?";
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// alpha accessor that optionally swaps in renormalized attention
struct AlphaView {
  const reader::AttnRecord& rec;
  std::vector<double> post; // filled when post_softmax

  double at(int64_t i, int64_t j, int k, int h) const {
    return post.empty() ? rec.at(i, j, k, h) : post[rec.index(i, j, k, h)];
  }
};

AlphaView make_view(const reader::AttnRecord& rec, bool post_softmax) {
  AlphaView view{rec, {}};
  if (!post_softmax) return view;
  view.post.resize(rec.alpha.size());
  std::vector<double> row(static_cast<size_t>(rec.t_in));
  for (int64_t i = 0; i < rec.t_out; ++i)
    for (int k = 0; k < rec.n_layers; ++k)
      for (int h = 0; h < rec.n_heads; ++h) {
        for (int64_t j = 0; j < rec.t_in; ++j)
          row[static_cast<size_t>(j)] = rec.at(i, j, k, h);
        const std::vector<double> probs = numkit::softmax_values(row);
        for (int64_t j = 0; j < rec.t_in; ++j)
          view.post[rec.index(i, j, k, h)] = probs[static_cast<size_t>(j)];
      }
  return view;
}

} // namespace

RelevanceScores aggregate(const reader::AttnRecord& record, Scheme scheme,
                          const AggregateOptions& options) {
  if (record.t_out < 1)
    throw ArgumentError("aggregate: record has no output tokens");
  if (record.n_layers < 1 || record.n_heads < 1)
    throw ArgumentError("aggregate: record has no layers or heads");

  const AlphaView alpha = make_view(record, options.post_softmax);
  const int L = record.n_layers;
  const int H = record.n_heads;
  const int upper_from = L - (L + 1) / 2; // top ceil(L/2) layers

  RelevanceScores scores;
  scores.qid = record.qid;
  for (const reader::Span& span : record.spans) {
    const int64_t j_begin =
        options.passage_text_only ? span.text_begin : span.begin;
    const int64_t j_end = span.end;
    if (j_begin >= j_end)
      throw DataError("aggregate: no tokens to pool for passage " + span.pid +
                      " in question " + record.qid);

    double g = 0.0;
    switch (scheme) {
      case Scheme::mean_tokens_layers_heads: {
        double sum = 0.0;
        for (int64_t j = j_begin; j < j_end; ++j)
          for (int k = 0; k < L; ++k)
            for (int h = 0; h < H; ++h) sum += alpha.at(0, j, k, h);
        g = sum / (static_cast<double>(j_end - j_begin) * L * H);
        break;
      }
      case Scheme::max_token_mean_rest: {
        double sum = 0.0;
        for (int k = 0; k < L; ++k)
          for (int h = 0; h < H; ++h) {
            double m = kNegInf;
            for (int64_t j = j_begin; j < j_end; ++j)
              m = std::max(m, alpha.at(0, j, k, h));
            sum += m;
          }
        g = sum / (static_cast<double>(L) * H);
        break;
      }
      case Scheme::mean_all_outputs: {
        double sum = 0.0;
        for (int64_t i = 0; i < record.t_out; ++i)
          for (int64_t j = j_begin; j < j_end; ++j)
            for (int k = 0; k < L; ++k)
              for (int h = 0; h < H; ++h) sum += alpha.at(i, j, k, h);
        g = sum / (static_cast<double>(record.t_out) *
                   static_cast<double>(j_end - j_begin) * L * H);
        break;
      }
      case Scheme::mean_upper_layers: {
        double sum = 0.0;
        for (int64_t j = j_begin; j < j_end; ++j)
          for (int k = upper_from; k < L; ++k)
            for (int h = 0; h < H; ++h) sum += alpha.at(0, j, k, h);
        g = sum / (static_cast<double>(j_end - j_begin) * (L - upper_from) * H);
        break;
      }
      case Scheme::max_layer_mean_rest: {
        double sum = 0.0;
        for (int64_t j = j_begin; j < j_end; ++j)
          for (int h = 0; h < H; ++h) {
            double m = kNegInf;
            for (int k = 0; k < L; ++k) m = std::max(m, alpha.at(0, j, k, h));
            sum += m;
          }
        g = sum / (static_cast<double>(j_end - j_begin) * H);
        break;
      }
      case Scheme::max_head_mean_rest: {
        double sum = 0.0;
        for (int64_t j = j_begin; j < j_end; ++j)
          for (int k = 0; k < L; ++k) {
            double m = kNegInf;
            for (int h = 0; h < H; ++h) m = std::max(m, alpha.at(0, j, k, h));
            sum += m;
          }
        g = sum / (static_cast<double>(j_end - j_begin) * L);
        break;
      }
    }
    if (!std::isfinite(g))
      throw DataError("aggregate: non-finite score for passage " + span.pid);
    scores.add(span.pid, g);
  }
  return scores;
}

std::vector<std::string> select_topk_by_attention(const RelevanceScores& scores,
                                                  int k) {
  if (k <= 0) throw ArgumentError("select_topk_by_attention: k must be > 0");
  if (static_cast<size_t>(k) > scores.size())
    throw ArgumentError("select_topk_by_attention: k exceeds the support set");
  std::vector<std::string> ranked = scores.ranking();
  ranked.resize(static_cast<size_t>(k));
  return ranked;
}

} // namespace atd::aggregate
