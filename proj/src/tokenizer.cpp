#include "atd/tokenizer.hpp"

#include "atd/errors.hpp"
#include "atd/rng.hpp"

namespace atd::datakit {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

} // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur += lower(c);
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

int32_t hash_token_id(std::string_view word, int vocab_size) {
  if (vocab_size <= kReservedCount)
    throw ArgumentError("vocab_size must exceed the reserved id count");
  const uint64_t h = fnv1a64(word);
  return kReservedCount +
         static_cast<int32_t>(h % static_cast<uint64_t>(vocab_size - kReservedCount));
}

TokenSeq tokenize(std::string_view text, int vocab_size) {
  TokenSeq ids;
  for (const std::string& w : split_words(text))
    ids.push_back(hash_token_id(w, vocab_size));
  return ids;
}

void Lexicon::observe_text(std::string_view text) {
  for (const std::string& w : split_words(text)) {
    const int32_t id = hash_token_id(w, vocab_size_);
    auto it = words_.find(id);
    if (it == words_.end() || w < it->second) words_[id] = w;
  }
}

const std::string& Lexicon::word_for(int32_t id) const {
  static const std::string empty;
  auto it = words_.find(id);
  return it == words_.end() ? empty : it->second;
}

std::string Lexicon::detokenize(const TokenSeq& ids) const {
  std::string out;
  for (int32_t id : ids) {
    if (id < kReservedCount) continue;
    const std::string& w = word_for(id);
    if (w.empty()) continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

} // namespace atd::datakit
