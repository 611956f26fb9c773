#include "atd/metrics.hpp"

#include <algorithm>
#include <unordered_set>

#include "atd/errors.hpp"

namespace atd::evalkit {

std::string normalize_answer(std::string_view text) {
  std::string spaced;
  spaced.reserve(text.size());
  for (unsigned char c : text) {
    if (c >= 'A' && c <= 'Z') {
      spaced += static_cast<char>(c - 'A' + 'a');
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      spaced += static_cast<char>(c);
    } else {
      spaced += ' '; // punctuation and whitespace collapse together
    }
  }
  std::string out;
  out.reserve(spaced.size());
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (word != "a" && word != "an" && word != "the") {
      if (!out.empty()) out += ' ';
      out += word;
    }
    word.clear();
  };
  for (char c : spaced) {
    if (c == ' ')
      flush();
    else
      word += c;
  }
  flush();
  return out;
}

int exact_match(std::string_view prediction,
                const std::vector<std::string>& gold_answers) {
  if (gold_answers.empty())
    throw ArgumentError("exact_match: need at least one gold answer");
  const std::string pred = normalize_answer(prediction);
  for (const std::string& gold : gold_answers)
    if (pred == normalize_answer(gold)) return 1;
  return 0;
}

bool hit_in_topk(const std::vector<std::string>& retrieved_pids,
                 const std::vector<std::string>& gold_answers,
                 const datakit::Corpus& corpus, int k) {
  if (k <= 0) throw ArgumentError("hit_in_topk: k must be > 0");
  if (gold_answers.empty())
    throw ArgumentError("hit_in_topk: need at least one gold answer");
  std::vector<std::string> golds;
  golds.reserve(gold_answers.size());
  for (const std::string& g : gold_answers)
    golds.push_back(normalize_answer(g));
  const size_t depth =
      std::min(retrieved_pids.size(), static_cast<size_t>(k));
  for (size_t i = 0; i < depth; ++i) {
    const std::string text =
        normalize_answer(corpus.at(retrieved_pids[i]).text);
    for (const std::string& g : golds)
      if (!g.empty() && text.find(g) != std::string::npos) return true;
  }
  return false;
}

double p_at_k(const std::vector<RetrievalCase>& cases,
              const datakit::Corpus& corpus, int k) {
  if (k <= 0) throw ArgumentError("p_at_k: k must be > 0");
  if (cases.empty()) return 0.0;
  int hits = 0;
  for (const RetrievalCase& c : cases)
    if (hit_in_topk(c.retrieved_pids, c.gold_answers, corpus, k)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [k, v] : p_at) p[std::to_string(k)] = v;
  j["p_at"] = std::move(p);
  j["em"] = em;
  j["n_questions"] = n_questions;
  return j;
}

namespace {

void require_same_ids(const RelevanceScores& a, const RelevanceScores& b) {
  if (a.entries.size() != b.entries.size())
    throw DataError("ranking_monitors: passage sets differ for question " +
                    a.qid);
  for (size_t i = 0; i < a.entries.size(); ++i)
    if (a.entries[i].first != b.entries[i].first)
      throw DataError("ranking_monitors: passage sets differ for question " +
                      a.qid + " (" + a.entries[i].first + " vs " +
                      b.entries[i].first + ")");
}

} // namespace

Monitors ranking_monitors(const RelevanceScores& reader_scores,
                          const RelevanceScores& retriever_scores, int k) {
  if (k <= 0) throw ArgumentError("ranking_monitors: k must be > 0");
  require_same_ids(reader_scores, retriever_scores);
  const size_t n = reader_scores.entries.size();
  Monitors m;

  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double dr =
          reader_scores.entries[i].second - reader_scores.entries[j].second;
      const double ds = retriever_scores.entries[i].second -
                        retriever_scores.entries[j].second;
      if (dr == 0.0 || ds == 0.0) continue;
      if ((dr > 0.0) != (ds > 0.0)) ++m.inversions;
    }

  const int kk = static_cast<int>(std::min<size_t>(n, static_cast<size_t>(k)));
  const std::vector<std::string> reader_rank = reader_scores.ranking();
  const std::vector<std::string> retriever_rank = retriever_scores.ranking();
  std::unordered_set<std::string> reader_top(reader_rank.begin(),
                                             reader_rank.begin() + kk);
  int found = 0;
  int overlap_hits = 0;
  m.coverage_depth = kk;
  for (size_t i = 0; i < retriever_rank.size(); ++i) {
    if (!reader_top.count(retriever_rank[i])) continue;
    ++found;
    if (static_cast<int>(i) < kk) ++overlap_hits;
    if (found == kk) {
      m.coverage_depth = static_cast<int>(i) + 1;
      break;
    }
  }
  m.overlap =
      kk == 0 ? 0.0 : static_cast<double>(overlap_hits) / static_cast<double>(kk);
  return m;
}

double kendall_tau(const RelevanceScores& a, const RelevanceScores& b) {
  require_same_ids(a, b);
  const size_t n = a.entries.size();
  long long concordant = 0, discordant = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const double da = a.entries[i].second - a.entries[j].second;
      const double db = b.entries[i].second - b.entries[j].second;
      if (da == 0.0 || db == 0.0) continue;
      if ((da > 0.0) == (db > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  const long long total = concordant + discordant;
  if (total == 0) return 0.0;
  return static_cast<double>(concordant - discordant) /
         static_cast<double>(total);
}

} // namespace atd::evalkit
