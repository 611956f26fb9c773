#pragma once

#include <string>
#include <utility>
#include <vector>

namespace atd {

// Per-question relevance map: one (pid, score) entry per support passage.
// Entries are kept sorted by pid so serialization is canonical.
struct RelevanceScores {
  std::string qid;
  std::vector<std::pair<std::string, double>> entries;

  void add(std::string pid, double score);
  bool has(const std::string& pid) const;
  double at(const std::string& pid) const;
  size_t size() const { return entries.size(); }

  // pids ordered by (score desc, pid asc)
  std::vector<std::string> ranking() const;
};

// scores.jsonl record: {"qid", "scheme", "scores": {pid: value}} with values
// printed at 17 significant digits.
struct ScoresRecord {
  RelevanceScores scores;
  std::string scheme;
};

std::string scores_line(const RelevanceScores& scores,
                        const std::string& scheme);
void save_scores(const std::string& path,
                 const std::vector<ScoresRecord>& records);
std::vector<ScoresRecord> load_scores(const std::string& path);

} // namespace atd
