#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "atd/data.hpp"
#include "atd/scores.hpp"

namespace atd::evalkit {

// Reading-comprehension answer normalization: lowercase, strip punctuation,
// drop articles (a/an/the), collapse whitespace.
std::string normalize_answer(std::string_view text);

// 1 iff the normalized prediction equals some normalized gold answer.
int exact_match(std::string_view prediction,
                const std::vector<std::string>& gold_answers);

// A hit is any of the top-k passages whose normalized text contains a
// normalized gold answer as a substring.
bool hit_in_topk(const std::vector<std::string>& retrieved_pids,
                 const std::vector<std::string>& gold_answers,
                 const datakit::Corpus& corpus, int k);

struct RetrievalCase {
  std::vector<std::string> retrieved_pids; // ranked
  std::vector<std::string> gold_answers;
};

double p_at_k(const std::vector<RetrievalCase>& cases,
              const datakit::Corpus& corpus, int k);

struct EvalReport {
  std::map<int, double> p_at;
  double em = 0.0;
  int n_questions = 0;

  nlohmann::json to_json() const;
};

// Agreement between a teacher and a student ranking over one support set.
// inversions counts pairs the two orders rank oppositely (pairs tied in
// either map are excluded); overlap is |topk ∩ topk| / k; coverage_depth is
// the smallest m such that the student's top-m covers the teacher's top-k.
struct Monitors {
  long long inversions = 0;
  double overlap = 0.0;
  int coverage_depth = 0;
};

Monitors ranking_monitors(const RelevanceScores& reader_scores,
                          const RelevanceScores& retriever_scores, int k);

// Kendall tau over pairs with distinct scores in both maps; 0 when no such
// pair exists.
double kendall_tau(const RelevanceScores& a, const RelevanceScores& b);

} // namespace atd::evalkit
