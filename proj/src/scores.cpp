#include "atd/scores.hpp"

#include <algorithm>

#include <json.hpp>

#include "atd/errors.hpp"
#include "atd/io_util.hpp"

namespace atd {

using nlohmann::json;

void RelevanceScores::add(std::string pid, double score) {
  auto pos = std::lower_bound(
      entries.begin(), entries.end(), pid,
      [](const auto& e, const std::string& p) { return e.first < p; });
  if (pos != entries.end() && pos->first == pid)
    throw DataError("duplicate score entry for passage " + pid +
                    " in question " + qid);
  entries.insert(pos, {std::move(pid), score});
}

bool RelevanceScores::has(const std::string& pid) const {
  auto pos = std::lower_bound(
      entries.begin(), entries.end(), pid,
      [](const auto& e, const std::string& p) { return e.first < p; });
  return pos != entries.end() && pos->first == pid;
}

double RelevanceScores::at(const std::string& pid) const {
  auto pos = std::lower_bound(
      entries.begin(), entries.end(), pid,
      [](const auto& e, const std::string& p) { return e.first < p; });
  if (pos == entries.end() || pos->first != pid)
    throw DataError("no score for passage " + pid + " in question " + qid);
  return pos->second;
}

std::vector<std::string> RelevanceScores::ranking() const {
  std::vector<std::pair<std::string, double>> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> pids;
  pids.reserve(sorted.size());
  for (auto& [pid, score] : sorted) pids.push_back(std::move(pid));
  return pids;
}

std::string scores_line(const RelevanceScores& scores,
                        const std::string& scheme) {
  std::string out = "{\"qid\":\"" + json_escape(scores.qid) +
                    "\",\"scheme\":\"" + json_escape(scheme) +
                    "\",\"scores\":{";
  for (size_t i = 0; i < scores.entries.size(); ++i) {
    if (i) out += ',';
    out += "\"" + json_escape(scores.entries[i].first) +
           "\":" + g17(scores.entries[i].second);
  }
  out += "}}";
  return out;
}

void save_scores(const std::string& path,
                 const std::vector<ScoresRecord>& records) {
  std::string out;
  for (const ScoresRecord& rec : records)
    out += scores_line(rec.scores, rec.scheme) + "\n";
  write_file(path, out);
}

std::vector<ScoresRecord> load_scores(const std::string& path) {
  std::vector<ScoresRecord> out;
  for (const std::string& line : read_lines(path)) {
    try {
      json j = json::parse(line);
      ScoresRecord rec;
      rec.scores.qid = j.at("qid").get<std::string>();
      rec.scheme = j.value("scheme", "");
      for (const auto& [pid, v] : j.at("scores").items())
        rec.scores.add(pid, v.get<double>());
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError("bad scores record in " + path + ": " + e.what());
    }
  }
  return out;
}

} // namespace atd
