#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace atd::datakit {

using TokenSeq = std::vector<int32_t>;

// Reserved token ids live below the hash range.
inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kBosId = 1;
inline constexpr int32_t kEosId = 2;
inline constexpr int32_t kClsId = 3;
inline constexpr int32_t kQuestionMarkId = 4;
inline constexpr int32_t kTitleMarkId = 5;
inline constexpr int32_t kContextMarkId = 6;
inline constexpr int32_t kReservedCount = 7;

// Lowercased alphanumeric runs; bytes >= 0x80 are treated as word characters
// so multi-byte sequences stay intact.
std::vector<std::string> split_words(std::string_view text);

// Stable word -> id map: reserved + fnv1a64(word) mod (vocab - reserved).
int32_t hash_token_id(std::string_view word, int vocab_size);

TokenSeq tokenize(std::string_view text, int vocab_size);

// Reverse map for decoding generated ids back to words. Hash ids are not
// invertible, so the lexicon keeps the lexicographically smallest word seen
// for each id; that choice is order-independent and reproducible.
class Lexicon {
public:
  explicit Lexicon(int vocab_size) : vocab_size_(vocab_size) {}

  void observe_text(std::string_view text);
  const std::string& word_for(int32_t id) const; // empty if unseen
  std::string detokenize(const TokenSeq& ids) const;
  int vocab_size() const { return vocab_size_; }

private:
  int vocab_size_;
  std::unordered_map<int32_t, std::string> words_;
};

} // namespace atd::datakit
