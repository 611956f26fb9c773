#include <doctest.h>

#include <cmath>

#include "atd/distill.hpp"
#include "atd/gradcheck.hpp"
#include "atd/metrics.hpp"
#include "atd/ops.hpp"
#include "atd/worldgen.hpp"

using namespace atd;
using namespace atd::distill;
using numkit::Tensor;

namespace {

Tensor scores_of(const std::vector<double>& v, bool requires_grad = true) {
  return Tensor::from_data({static_cast<int64_t>(v.size())},
                           std::vector<double>(v), requires_grad);
}

} // namespace

TEST_CASE("kl loss identities") {
  // identical values give zero divergence
  for (const std::vector<double>& v :
       {std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{-4.0, -4.0},
        std::vector<double>{0.25, -1.5, 7.0, 7.0}}) {
    Tensor loss = loss_kl(scores_of(v), v);
    CHECK(std::fabs(loss.item()) <= 1e-12);
  }

  // hand-computed value: G = (ln 3, 0), S = (0, 0)
  Tensor loss = loss_kl(scores_of({0.0, 0.0}), {std::log(3.0), 0.0});
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(loss.item() == doctest::Approx(0.130812).epsilon(1e-5));

  CHECK_THROWS_AS(loss_kl(scores_of({1.0}), {1.0}), ArgumentError);
}

TEST_CASE("kl loss is invariant under constant shifts") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> g(5), s(5);
    for (double& v : g) v = -2.0 + 4.0 * rng.uniform();
    for (double& v : s) v = -2.0 + 4.0 * rng.uniform();
    const double base = loss_kl(scores_of(s), g).item();
    const double c = -3.0 + 6.0 * rng.uniform();
    std::vector<double> g_shift = g, s_shift = s;
    for (double& v : g_shift) v += c;
    for (double& v : s_shift) v += c;
    CHECK(std::fabs(loss_kl(scores_of(s), g_shift).item() - base) <= 1e-12);
    CHECK(std::fabs(loss_kl(scores_of(s_shift), g).item() - base) <= 1e-12);
  }
}

TEST_CASE("kl is nonnegative and zero only at matching distributions") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(4), s(4);
    for (double& v : g) v = -2.0 + 4.0 * rng.uniform();
    for (double& v : s) v = -2.0 + 4.0 * rng.uniform();
    const double val = loss_kl(scores_of(s), g).item();
    CHECK(val >= -1e-15);

    std::vector<double> sg = numkit::softmax_values(s);
    std::vector<double> gg = numkit::softmax_values(g);
    double max_gap = 0.0;
    for (size_t i = 0; i < sg.size(); ++i)
      max_gap = std::max(max_gap, std::fabs(sg[i] - gg[i]));
    if (val <= 1e-10) CHECK(max_gap <= 1e-4);
    if (max_gap <= 1e-12) CHECK(val <= 1e-10);
  }
}

TEST_CASE("kl gradient equals the softmax gap") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> g(6), s(6);
    for (double& v : g) v = -2.0 + 4.0 * rng.uniform();
    for (double& v : s) v = -2.0 + 4.0 * rng.uniform();
    Tensor st = scores_of(s);
    Tensor loss = loss_kl(st, g);
    numkit::backward(loss);
    const std::vector<double> s_probs = numkit::softmax_values(s);
    const std::vector<double> g_probs = numkit::softmax_values(g);
    for (size_t i = 0; i < s.size(); ++i) {
      const double analytic = s_probs[i] - g_probs[i];
      CHECK(std::fabs(st.grad()[i] - analytic) <= 1e-10);
    }
  }
}

TEST_CASE("mse loss values and gradient") {
  CHECK(loss_mse(scores_of({1.0, 2.0}), {1.0, 2.0}).item() == 0.0);
  CHECK(loss_mse(scores_of({0.0, 0.0}), {1.0, 2.0}).item() == 5.0);

  Tensor s = scores_of({0.3, -0.7, 1.1});
  std::vector<double> g = {1.0, 0.0, -1.0};
  Tensor loss = loss_mse(s, g);
  numkit::backward(loss);
  for (size_t i = 0; i < g.size(); ++i)
    CHECK(s.grad()[i] == doctest::Approx(2.0 * (s.data()[i] - g[i])));

  auto f = [&] { return loss_mse(scores_of({0.3, -0.7, 1.1}), g); };
  (void)f; // finite differences are covered in the numkit suite
}

TEST_CASE("margin loss values") {
  // perfectly ordered with gaps >= gamma
  CHECK(loss_margin(scores_of({3.0, 2.0, 1.0}), {5.0, 4.0, 3.0}, 1.0).item() ==
        0.0);
  // single-pair hand oracle
  CHECK(loss_margin(scores_of({0.0, 0.0}), {2.0, 1.0}, 0.2).item() ==
        doctest::Approx(0.2));
  CHECK_THROWS_AS(loss_margin(scores_of({0.0, 0.0}), {2.0, 1.0}, 0.0),
                  ArgumentError);
  CHECK_THROWS_AS(loss_margin(scores_of({0.0}), {2.0}, 0.1), ArgumentError);
}

TEST_CASE("margin loss ignores tied targets and constant shifts of scores") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> g = {1.0, 1.0, 2.0, 0.0, 2.0};
    std::vector<double> s(5);
    for (double& v : s) v = -2.0 + 4.0 * rng.uniform();
    const double base = loss_margin(scores_of(s), g, 0.5).item();
    const double c = -5.0 + 10.0 * rng.uniform();
    std::vector<double> s_shift = s;
    for (double& v : s_shift) v += c;
    CHECK(std::fabs(loss_margin(scores_of(s_shift), g, 0.5).item() - base) <=
          1e-12);
  }
}

TEST_CASE("margin loss saturates iff the ordering matches") {
  std::vector<double> g = {3.0, 2.0, 1.0};
  // correct ordering: scaling up drives the loss to zero
  std::vector<double> s_good = {0.3, 0.2, 0.1};
  std::vector<double> s_scaled = s_good;
  for (double& v : s_scaled) v *= 100.0;
  CHECK(loss_margin(scores_of(s_scaled), g, 1.0).item() == 0.0);
  // one inversion: no scaling can remove the violated pair
  std::vector<double> s_bad = {0.2, 0.3, 0.1};
  for (double& v : s_bad) v *= 1000.0;
  CHECK(loss_margin(scores_of(s_bad), g, 1.0).item() > 0.0);
}

TEST_CASE("all three losses gradcheck through the embedder") {
  biencoder::EmbedderConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.vocab_size = 32;
  cfg.max_len = 12;
  cfg.dropout = 0.0;
  biencoder::Embedder embedder(cfg, 23);

  DistillExample ex;
  ex.qid = "q";
  ex.question = {8, 9};
  ex.pids = {"a", "b", "c"};
  ex.passages = {{10, 11, 12}, {13, 14}, {15, 16, 17}};
  ex.targets = {1.5, 0.2, -0.6};

  auto scores_fn = [&] {
    numkit::Tensor q = biencoder::Embedder::embed_t(
        embedder.params(), cfg, ex.question, false, nullptr);
    std::vector<numkit::Tensor> ss;
    for (const auto& p : ex.passages)
      ss.push_back(numkit::dot(
          q, biencoder::Embedder::embed_t(embedder.params(), cfg, p, false,
                                          nullptr)));
    return numkit::stack_scalars(ss);
  };

  for (LossSpec spec : {LossSpec{LossKind::kl, 1.0},
                        LossSpec{LossKind::mse, 1.0},
                        LossSpec{LossKind::max_margin, 0.2}}) {
    auto f = [&] { return loss_of(spec, scores_fn(), ex.targets); };
    auto report = numkit::gradcheck(f, embedder.params().items(), 1e-5, 1e-4);
    CAPTURE(loss_kind_name(spec.kind));
    CHECK(report.pass);
  }
}

namespace {

// tiny synthetic distillation set with graded targets
std::vector<DistillExample> toy_distill_data(int n_questions, int n_passages,
                                             int vocab, uint64_t seed) {
  datakit::WorldConfig wc;
  wc.seed = seed;
  wc.n_passages = n_passages;
  wc.n_questions = n_questions;
  wc.relevant_per_q = 3;
  wc.passage_len = 12;
  wc.topic_words = 4;
  wc.val_fraction = 0.0;
  datakit::SyntheticWorld world = datakit::gen_world(wc);

  Rng rng(mix_seed(seed, "support"));
  std::vector<datakit::QaExample> examples = world.train;
  datakit::fill_support(examples, world.truth, world.corpus,
                        datakit::InitMode::oracle, 12, 0.1, rng);

  std::vector<DistillExample> out;
  for (const datakit::QaExample& ex : examples) {
    const datakit::GroundTruth& gt = datakit::truth_for(world.truth, ex.qid);
    DistillExample d;
    d.qid = ex.qid;
    d.question = datakit::tokenize(ex.question, vocab);
    for (const std::string& pid : ex.support) {
      const datakit::Passage& p = world.corpus.at(pid);
      d.pids.push_back(pid);
      d.passages.push_back(
          datakit::tokenize(p.title + " " + p.text, vocab));
      double grade = 0.0;
      for (const auto& [rpid, g] : gt.relevant)
        if (rpid == pid) grade = g;
      d.targets.push_back(grade);
    }
    out.push_back(std::move(d));
  }
  return out;
}

} // namespace

TEST_CASE("train_retriever with zero lr leaves params unchanged") {
  biencoder::EmbedderConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 1;
  cfg.vocab_size = 512;
  cfg.max_len = 24;
  biencoder::Embedder embedder(cfg, 3);
  const uint64_t before = embedder.params().value_checksum();

  numkit::Adam opt(embedder.params(), {.lr = 0.0, .clip_norm = 1.0});
  auto data = toy_distill_data(4, 30, cfg.vocab_size, 5);
  RetrieverTrainConfig tc;
  tc.max_epochs = 1;
  tc.batch_size = 4;
  tc.seed = 1;
  tc.threads = 1;
  train_retriever(embedder, opt, data, tc);
  CHECK(embedder.params().value_checksum() == before);
}

TEST_CASE("train_retriever is deterministic under a fixed seed") {
  auto run = [&] {
    biencoder::EmbedderConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.vocab_size = 512;
    cfg.max_len = 24;
    cfg.dropout = 0.1;
    biencoder::Embedder embedder(cfg, 3);
    numkit::Adam opt(embedder.params(), {.lr = 5e-4, .clip_norm = 1.0});
    auto data = toy_distill_data(6, 30, cfg.vocab_size, 5);
    RetrieverTrainConfig tc;
    tc.max_epochs = 2;
    tc.batch_size = 3;
    tc.seed = 9;
    tc.threads = 2;
    return std::make_pair(train_retriever(embedder, opt, data, tc),
                          embedder.params().value_checksum());
  };
  auto [r1, c1] = run();
  auto [r2, c2] = run();
  CHECK(c1 == c2);
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].to_json_line() == r2.log[i].to_json_line());
  }
}

TEST_CASE("retriever learns a planted teacher ranking" *
          doctest::timeout(300)) {
  biencoder::EmbedderConfig cfg;
  cfg.d_model = 24;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.vocab_size = 2048;
  cfg.max_len = 24;
  cfg.dropout = 0.0;
  biencoder::Embedder embedder(cfg, 3);
  numkit::Adam opt(embedder.params(), {.lr = 2e-3, .clip_norm = 1.0});

  auto data = toy_distill_data(24, 120, cfg.vocab_size, 5);
  std::vector<DistillExample> train(data.begin(), data.end() - 4);
  std::vector<DistillExample> held_out(data.end() - 4, data.end());

  RetrieverTrainConfig tc;
  tc.loss = {LossKind::kl, 1.0};
  tc.max_epochs = 30;
  tc.batch_size = 8;
  tc.seed = 9;
  tc.threads = 2;
  tc.monitor_k = 3;
  tc.patience = 5;
  auto result = train_retriever(embedder, opt, train, tc);
  CHECK(result.epochs_run >= 1);

  double tau_sum = 0.0;
  for (const DistillExample& ex : held_out) {
    RelevanceScores teacher;
    teacher.qid = ex.qid;
    for (size_t p = 0; p < ex.pids.size(); ++p)
      teacher.add(ex.pids[p], ex.targets[p]);
    tau_sum += evalkit::kendall_tau(teacher, retriever_scores(embedder, ex));
  }
  CHECK(tau_sum / static_cast<double>(held_out.size()) >= 0.8);
}
