#pragma once

#include <string>
#include <vector>

#include "atd/reader.hpp"
#include "atd/scores.hpp"

namespace atd::aggregate {

// Reductions of the recorded cross-attention tensor alpha[i, j, k, h] to one
// scalar per passage. i: output tokens, j: input tokens of the passage,
// k: decoder layers, h: heads. Except where noted, i = 0 (first output token).
enum class Scheme {
  mean_tokens_layers_heads = 0, // mean over j, k, h
  max_token_mean_rest = 1,      // mean over k, h of max over j
  mean_all_outputs = 2,         // mean over i, j, k, h
  mean_upper_layers = 3,        // mean over j, h and the top ceil(L/2) layers
  max_layer_mean_rest = 4,      // mean over j, h of max over k
  max_head_mean_rest = 5,       // mean over j, k of max over h
};

Scheme scheme_from_int(int value);
int scheme_to_int(Scheme scheme);
std::string scheme_name(Scheme scheme);

struct AggregateOptions {
  // Pool only over context-text tokens instead of the whole segment
  // (question/title prefix included by default).
  bool passage_text_only = false;
  // Aggregate normalized attention instead of the raw pre-softmax scores.
  bool post_softmax = false;
};

RelevanceScores aggregate(const reader::AttnRecord& record, Scheme scheme,
                          const AggregateOptions& options = {});

// Passages ordered by score descending, ties by ascending pid; first k.
std::vector<std::string> select_topk_by_attention(const RelevanceScores& scores,
                                                  int k);

} // namespace atd::aggregate
