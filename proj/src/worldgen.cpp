#include "atd/worldgen.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "atd/errors.hpp"
#include "atd/io_util.hpp"

namespace atd::datakit {

namespace {

using nlohmann::json;

const char* kSyllables[] = {"ba", "de", "ki", "lo", "mu", "na", "re", "si",
                            "to", "vu", "ga", "pe", "ri", "so", "tu", "wa",
                            "ze", "bi", "do", "ku", "la", "me", "no", "ra",
                            "se", "ti", "vo", "wi", "za", "bu"};
constexpr int kSyllableCount = 30;

// Pool prefixes keep filler / topic / answer / title vocabularies textually
// disjoint; distinctness within a pool comes from the base-30 digits.
std::string make_word(const char* prefix, int idx) {
  std::string w = prefix;
  int v = idx;
  for (int i = 0; i < 3; ++i) {
    w += kSyllables[v % kSyllableCount];
    v /= kSyllableCount;
  }
  return w;
}

std::string filler_word(int idx) { return make_word("f", idx); }
std::string topic_word(int idx) { return make_word("t", idx); }
std::string answer_word(int idx) { return make_word("z", idx); }
std::string decoy_word(int idx) { return make_word("y", idx); }
std::string title_word(int idx) { return make_word("h", idx); }

constexpr int kFillerPool = 500;

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

} // namespace

SyntheticWorld gen_world(const WorldConfig& cfg) {
  if (cfg.relevant_per_q < 1)
    throw ArgumentError("gen_world: relevant_per_q must be >= 1");
  if (!(cfg.leak >= 0.0 && cfg.leak < 1.0))
    throw ArgumentError("gen_world: leak must be in [0, 1)");
  if (cfg.n_questions < 1 || cfg.n_passages < 1)
    throw ArgumentError("gen_world: need at least one question and passage");
  if (static_cast<int64_t>(cfg.relevant_per_q) * cfg.n_questions >
      cfg.n_passages)
    throw ArgumentError("gen_world: relevant_per_q * n_questions exceeds the corpus size");
  if (cfg.passage_len < cfg.topic_words + 4)
    throw ArgumentError("gen_world: passage_len too small for topic words plus the answer cue");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0))
    throw ArgumentError("gen_world: val_fraction must be in [0, 1)");

  Rng rng(mix_seed(cfg.seed, "worldgen"));
  SyntheticWorld world;

  const int r = cfg.relevant_per_q;
  const int n_relevant_total = r * cfg.n_questions;

  std::vector<QaExample> questions(static_cast<size_t>(cfg.n_questions));
  std::vector<std::vector<std::string>> leak_words(
      static_cast<size_t>(cfg.n_passages));

  if (cfg.topic_pool < cfg.topic_words)
    throw ArgumentError("gen_world: topic_pool smaller than topic_words");

  for (int qi = 0; qi < cfg.n_questions; ++qi) {
    QaExample& ex = questions[static_cast<size_t>(qi)];
    ex.qid = "q" + std::to_string(qi);
    // distinct topic words sampled from the shared pool
    std::vector<std::string> topics;
    {
      std::vector<uint8_t> taken(static_cast<size_t>(cfg.topic_pool), 0);
      while (static_cast<int>(topics.size()) < cfg.topic_words) {
        const size_t t = rng.uniform_int(static_cast<uint64_t>(cfg.topic_pool));
        if (taken[t]) continue;
        taken[t] = 1;
        topics.push_back(topic_word(static_cast<int>(t)));
      }
    }
    const std::string answer = answer_word(qi);
    ex.question = "find the word for " + join(topics);
    ex.answers = {answer};

    GroundTruth gt;
    gt.qid = ex.qid;
    for (int j = 0; j < r; ++j) {
      const int pidx = qi * r + j;
      const std::string pid = "p" + std::to_string(pidx);
      // graded signal: passage j shares topic_words - j topic words
      const int n_topics = std::max(1, cfg.topic_words - j);
      std::vector<std::string> words(topics.begin(), topics.begin() + n_topics);
      while (static_cast<int>(words.size()) < cfg.passage_len - 3)
        words.push_back(filler_word(
            static_cast<int>(rng.uniform_int(kFillerPool))));
      rng.shuffle(words);
      const size_t cue_at = rng.uniform_int(words.size() + 1);
      std::vector<std::string> text(words.begin(),
                                    words.begin() + static_cast<long>(cue_at));
      text.push_back("answer");
      text.push_back("is");
      text.push_back(answer);
      text.insert(text.end(), words.begin() + static_cast<long>(cue_at),
                  words.end());

      Passage p;
      p.pid = pid;
      p.title = topics[0] + " " + title_word(pidx);
      p.text = join(text);
      world.corpus.add(std::move(p));
      gt.relevant.emplace_back(pid, static_cast<double>(r - j));
    }
    world.truth.push_back(std::move(gt));
  }

  // Filler passages carry the same "answer is <word>" shape with a decoy
  // word, so the cue itself says nothing about relevance.
  for (int pidx = n_relevant_total; pidx < cfg.n_passages; ++pidx) {
    Passage p;
    p.pid = "p" + std::to_string(pidx);
    p.title = title_word(pidx) + " " +
              filler_word(static_cast<int>(rng.uniform_int(kFillerPool)));
    std::vector<std::string> words(
        static_cast<size_t>(cfg.passage_len - 3));
    for (auto& w : words)
      w = filler_word(static_cast<int>(rng.uniform_int(kFillerPool)));
    const size_t cue_at = rng.uniform_int(words.size() + 1);
    std::vector<std::string> text(words.begin(),
                                  words.begin() + static_cast<long>(cue_at));
    text.push_back("answer");
    text.push_back("is");
    text.push_back(decoy_word(pidx));
    text.insert(text.end(), words.begin() + static_cast<long>(cue_at),
                words.end());
    p.text = join(text);
    world.corpus.add(std::move(p));
  }

  // Leaked answers: the bare answer word lands in irrelevant passages, with
  // no cue, so containment metrics see their false-positive mode.
  if (cfg.leak > 0.0) {
    for (int qi = 0; qi < cfg.n_questions; ++qi) {
      const int n_irrelevant = cfg.n_passages - r;
      const int n_leak =
          static_cast<int>(std::floor(cfg.leak * n_irrelevant));
      for (int l = 0; l < n_leak; ++l) {
        int pidx;
        do {
          pidx = static_cast<int>(rng.uniform_int(cfg.n_passages));
        } while (pidx >= qi * r && pidx < (qi + 1) * r);
        leak_words[static_cast<size_t>(pidx)].push_back(answer_word(qi));
      }
    }
    Corpus leaked;
    for (const Passage& p : world.corpus.passages()) {
      Passage np = p;
      const size_t idx = leaked.size();
      for (const std::string& w : leak_words[idx]) np.text += " " + w;
      leaked.add(std::move(np));
    }
    world.corpus = std::move(leaked);
  }

  const int n_train = cfg.n_questions -
                      static_cast<int>(std::floor(cfg.val_fraction * cfg.n_questions));
  world.train.assign(questions.begin(), questions.begin() + n_train);
  world.val.assign(questions.begin() + n_train, questions.end());
  return world;
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "planted-weak") return InitMode::planted_weak;
  if (name == "random") return InitMode::random_init;
  if (name == "oracle") return InitMode::oracle;
  throw ArgumentError("unknown init mode: " + name +
                      " (expected planted-weak, random, or oracle)");
}

std::string init_mode_name(InitMode mode) {
  switch (mode) {
    case InitMode::planted_weak: return "planted-weak";
    case InitMode::random_init: return "random";
    case InitMode::oracle: return "oracle";
  }
  return "?";
}

const GroundTruth& truth_for(const std::vector<GroundTruth>& truth,
                             const std::string& qid) {
  for (const GroundTruth& gt : truth)
    if (gt.qid == qid) return gt;
  throw DataError("no ground truth for question " + qid);
}

void fill_support(std::vector<QaExample>& examples,
                  const std::vector<GroundTruth>& truth, const Corpus& corpus,
                  InitMode mode, int n_ctx, double weak_fraction, Rng& rng) {
  if (n_ctx < 1) throw ArgumentError("fill_support: n_ctx must be >= 1");
  if (n_ctx > static_cast<int>(corpus.size()))
    throw ArgumentError("fill_support: n_ctx exceeds corpus size");
  for (QaExample& ex : examples) {
    const GroundTruth& gt = truth_for(truth, ex.qid);
    std::vector<std::string> picked;
    if (mode == InitMode::oracle) {
      for (const auto& [pid, grade] : gt.relevant) {
        picked.push_back(pid);
        if (static_cast<int>(picked.size()) == n_ctx) break;
      }
    } else if (mode == InitMode::planted_weak) {
      const int n_weak = std::max(
          1, static_cast<int>(std::floor(weak_fraction * n_ctx)));
      // weakest-graded relevant passages first
      for (auto it = gt.relevant.rbegin();
           it != gt.relevant.rend() &&
           static_cast<int>(picked.size()) < std::min(n_weak, n_ctx);
           ++it)
        picked.push_back(it->first);
    }
    std::vector<uint8_t> used(corpus.size(), 0);
    for (const std::string& pid : picked) used[corpus.index_of(pid)] = 1;
    if (mode == InitMode::planted_weak) {
      // keep the planted fraction exact: unpicked relevant passages must not
      // slip in as random fillers
      for (const auto& [pid, grade] : gt.relevant)
        used[corpus.index_of(pid)] = 1;
    }
    while (static_cast<int>(picked.size()) < n_ctx) {
      const size_t i = rng.uniform_int(corpus.size());
      if (used[i]) continue;
      used[i] = 1;
      picked.push_back(corpus.passages()[i].pid);
    }
    rng.shuffle(picked);
    ex.support = std::move(picked);
  }
}

void save_truth(const std::string& path,
                const std::vector<GroundTruth>& truth) {
  std::string out;
  for (const GroundTruth& gt : truth) {
    out += "{\"qid\":\"" + json_escape(gt.qid) + "\",\"relevant\":[";
    for (size_t i = 0; i < gt.relevant.size(); ++i) {
      if (i) out += ',';
      out += "[\"" + json_escape(gt.relevant[i].first) + "\"," +
             g17(gt.relevant[i].second) + "]";
    }
    out += "]}\n";
  }
  write_file(path, out);
}

std::vector<GroundTruth> load_truth(const std::string& path) {
  std::vector<GroundTruth> out;
  for (const std::string& line : read_lines(path)) {
    try {
      json j = json::parse(line);
      GroundTruth gt;
      gt.qid = j.at("qid").get<std::string>();
      for (const auto& e : j.at("relevant"))
        gt.relevant.emplace_back(e.at(0).get<std::string>(),
                                 e.at(1).get<double>());
      out.push_back(std::move(gt));
    } catch (const json::exception& e) {
      throw DataError("bad truth record in " + path + ": " + e.what());
    }
  }
  return out;
}

} // namespace atd::datakit
