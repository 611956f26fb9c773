#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "atd/tokenizer.hpp"

namespace atd::datakit {

struct Passage {
  std::string pid;
  std::string title;
  std::string text;
};

struct QaExample {
  std::string qid;
  std::string question;
  std::vector<std::string> answers;
  std::vector<std::string> support; // current D_q, possibly empty before init
};

class Corpus {
public:
  void add(Passage p); // duplicate pid -> DataError

  size_t size() const { return passages_.size(); }
  const std::vector<Passage>& passages() const { return passages_; }
  bool has(const std::string& pid) const { return index_.count(pid) != 0; }
  const Passage& at(const std::string& pid) const;
  size_t index_of(const std::string& pid) const;

private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, size_t> index_;
};

// Line-delimited JSON: {"pid","title","text"} and
// {"qid","question","answers":[...],"support":[...]}
Corpus load_corpus(const std::string& path);
void save_corpus(const std::string& path, const Corpus& corpus);
std::vector<QaExample> load_examples(const std::string& path);
void save_examples(const std::string& path,
                   const std::vector<QaExample>& examples);

// Passage half of a reader input: title/context markers plus tokens.
// text_begin indexes the first context-text token inside `tokens`.
struct TokenizedPassage {
  std::string pid;
  TokenSeq tokens;
  int64_t text_begin = 0;
};

TokenSeq question_tokens(const std::string& question, int vocab_size);
TokenizedPassage passage_tokens(const Passage& p, int vocab_size);

// question marker + question + title marker + title + context marker + text,
// truncated from the tail to max_len. The question prefix is never dropped
// unless max_len cannot hold it.
TokenSeq assemble_input(const std::string& question, const Passage& p,
                        int vocab_size, int max_len);

} // namespace atd::datakit
