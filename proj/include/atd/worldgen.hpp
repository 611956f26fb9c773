#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "atd/data.hpp"
#include "atd/rng.hpp"

namespace atd::datakit {

struct WorldConfig {
  uint64_t seed = 0;
  int n_passages = 1000;
  int n_questions = 100;
  int relevant_per_q = 4;
  double leak = 0.0;       // fraction of irrelevant passages carrying the answer
  int passage_len = 25;    // words of context text per passage
  int topic_words = 6;     // topic words per question
  // Questions draw topic words from one shared pool, so held-out questions
  // reuse vocabulary seen during training attached to other questions.
  int topic_pool = 400;
  double val_fraction = 0.2;
};

// Graded hidden relevance for one question: (pid, grade), grade descending.
// Passages absent from the list have relevance 0.
struct GroundTruth {
  std::string qid;
  std::vector<std::pair<std::string, double>> relevant;
};

struct SyntheticWorld {
  Corpus corpus;
  std::vector<QaExample> train;
  std::vector<QaExample> val;
  std::vector<GroundTruth> truth; // train questions first, then val
};

// Deterministic synthetic QA world. Each question owns a set of topic words
// shared with its relevant passages; the answer word is planted in every
// relevant passage behind a fixed "answer is" cue and, when leak > 0, bare
// into floor(leak * n_irrelevant) other passages.
SyntheticWorld gen_world(const WorldConfig& cfg);

enum class InitMode { planted_weak, random_init, oracle };

InitMode parse_init_mode(const std::string& name);
std::string init_mode_name(InitMode mode);

// Builds D_q^0 for every example. oracle keeps all relevant passages,
// planted_weak keeps max(1, floor(weak_fraction * n_ctx)) of the weakest
// relevant ones, random keeps none on purpose; fillers are drawn uniformly
// without replacement up to n_ctx.
void fill_support(std::vector<QaExample>& examples,
                  const std::vector<GroundTruth>& truth, const Corpus& corpus,
                  InitMode mode, int n_ctx, double weak_fraction, Rng& rng);

const GroundTruth& truth_for(const std::vector<GroundTruth>& truth,
                             const std::string& qid);

// truth.jsonl: {"qid", "relevant": [[pid, grade], ...]}
void save_truth(const std::string& path, const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> load_truth(const std::string& path);

} // namespace atd::datakit
