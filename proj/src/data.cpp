#include "atd/data.hpp"

#include <json.hpp>

#include "atd/errors.hpp"
#include "atd/io_util.hpp"

namespace atd::datakit {

using nlohmann::json;

void Corpus::add(Passage p) {
  if (index_.count(p.pid))
    throw DataError("duplicate passage id: " + p.pid);
  index_.emplace(p.pid, passages_.size());
  passages_.push_back(std::move(p));
}

const Passage& Corpus::at(const std::string& pid) const {
  return passages_[index_of(pid)];
}

size_t Corpus::index_of(const std::string& pid) const {
  auto it = index_.find(pid);
  if (it == index_.end()) throw DataError("unknown passage id: " + pid);
  return it->second;
}

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  for (const std::string& line : read_lines(path)) {
    json j;
    try {
      j = json::parse(line);
      Passage p;
      p.pid = j.at("pid").get<std::string>();
      p.title = j.value("title", "");
      p.text = j.value("text", "");
      corpus.add(std::move(p));
    } catch (const json::exception& e) {
      throw DataError("bad corpus record in " + path + ": " + e.what());
    }
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::string out;
  for (const Passage& p : corpus.passages()) {
    out += "{\"pid\":\"" + json_escape(p.pid) + "\",\"text\":\"" +
           json_escape(p.text) + "\",\"title\":\"" + json_escape(p.title) +
           "\"}\n";
  }
  write_file(path, out);
}

std::vector<QaExample> load_examples(const std::string& path) {
  std::vector<QaExample> out;
  for (const std::string& line : read_lines(path)) {
    try {
      json j = json::parse(line);
      QaExample ex;
      ex.qid = j.at("qid").get<std::string>();
      ex.question = j.at("question").get<std::string>();
      ex.answers = j.at("answers").get<std::vector<std::string>>();
      if (ex.answers.empty())
        throw DataError("example " + ex.qid + " has no answers");
      if (j.contains("support"))
        ex.support = j.at("support").get<std::vector<std::string>>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw DataError("bad example record in " + path + ": " + e.what());
    }
  }
  return out;
}

void save_examples(const std::string& path,
                   const std::vector<QaExample>& examples) {
  std::string out;
  for (const QaExample& ex : examples) {
    out += "{\"answers\":[";
    for (size_t i = 0; i < ex.answers.size(); ++i) {
      if (i) out += ',';
      out += "\"" + json_escape(ex.answers[i]) + "\"";
    }
    out += "],\"qid\":\"" + json_escape(ex.qid) + "\",\"question\":\"" +
           json_escape(ex.question) + "\",\"support\":[";
    for (size_t i = 0; i < ex.support.size(); ++i) {
      if (i) out += ',';
      out += "\"" + json_escape(ex.support[i]) + "\"";
    }
    out += "]}\n";
  }
  write_file(path, out);
}

TokenSeq question_tokens(const std::string& question, int vocab_size) {
  TokenSeq out{kQuestionMarkId};
  const TokenSeq q = tokenize(question, vocab_size);
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

TokenizedPassage passage_tokens(const Passage& p, int vocab_size) {
  TokenizedPassage out;
  out.pid = p.pid;
  out.tokens.push_back(kTitleMarkId);
  const TokenSeq title = tokenize(p.title, vocab_size);
  out.tokens.insert(out.tokens.end(), title.begin(), title.end());
  out.tokens.push_back(kContextMarkId);
  out.text_begin = static_cast<int64_t>(out.tokens.size());
  const TokenSeq text = tokenize(p.text, vocab_size);
  out.tokens.insert(out.tokens.end(), text.begin(), text.end());
  return out;
}

TokenSeq assemble_input(const std::string& question, const Passage& p,
                        int vocab_size, int max_len) {
  if (question.empty()) throw ArgumentError("assemble_input: empty question");
  if (max_len <= 0) throw ArgumentError("assemble_input: max_len must be > 0");
  TokenSeq out = question_tokens(question, vocab_size);
  const TokenizedPassage pt = passage_tokens(p, vocab_size);
  out.insert(out.end(), pt.tokens.begin(), pt.tokens.end());
  if (static_cast<int>(out.size()) > max_len) out.resize(max_len);
  return out;
}

} // namespace atd::datakit
