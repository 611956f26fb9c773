#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "atd/checkpoint.hpp"
#include "atd/io_util.hpp"
#include "atd/ops.hpp"
#include "atd/optim.hpp"
#include "atd/params.hpp"
#include "atd/rng.hpp"

using namespace atd;
using namespace atd::numkit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("checkpoint round-trip is byte-exact") {
  Rng rng(21);
  ParamStore store;
  store.add_randn("w", {4, 3}, rng, 0.5);
  store.add_randn("b", {3}, rng, 0.1);
  store.add_full("s", {1}, 0.1); // exercises a non-integral double in meta too

  nlohmann::json meta;
  meta["kind"] = "test";
  meta["lr"] = 0.1;

  const std::string path = temp_path("atd_ckpt_test.bin");
  save_checkpoint(path, store.items(), meta);
  const std::string bytes1 = read_file(path);

  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta.at("kind") == "test");
  CHECK(loaded.tensors.size() == 3);
  for (const auto& [name, t] : store.items()) {
    Tensor lt = loaded.tensor(name);
    REQUIRE(lt.shape() == t.shape());
    for (int64_t i = 0; i < t.numel(); ++i)
      CHECK(lt.data()[i] == t.data()[i]);
  }

  const std::string path2 = temp_path("atd_ckpt_test2.bin");
  save_checkpoint(path2, loaded.tensors, loaded.meta);
  CHECK(read_file(path2) == bytes1);

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint rejects corrupt input") {
  const std::string path = temp_path("atd_ckpt_bad.bin");
  write_file(path, "NOTACHECKPOINT");
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("adam with zero lr leaves params unchanged") {
  Rng rng(3);
  ParamStore store;
  Tensor& w = store.add_randn("w", {5}, rng, 1.0);
  const std::vector<double> before(w.data().begin(), w.data().end());

  Adam opt(store, {.lr = 0.0, .clip_norm = 1.0});
  Tensor loss = sum_all(mul(w, w));
  backward(loss);
  opt.step();
  for (size_t i = 0; i < before.size(); ++i) CHECK(w.data()[i] == before[i]);
}

TEST_CASE("adam descends a quadratic") {
  ParamStore store;
  Tensor& w = store.add("w", Tensor::from_data({2}, {5.0, -4.0}, true));
  Adam opt(store, {.lr = 0.1});
  for (int i = 0; i < 300; ++i) {
    store.zero_grad();
    Tensor loss = sum_all(mul(w, w));
    backward(loss);
    opt.step();
  }
  CHECK(std::fabs(w.data()[0]) < 0.05);
  CHECK(std::fabs(w.data()[1]) < 0.05);
}

TEST_CASE("gradient clipping bounds the applied update") {
  ParamStore store;
  Tensor& w = store.add("w", Tensor::from_data({1}, {0.0}, true));
  Adam opt(store, {.lr = 1.0, .clip_norm = 1.0});
  Tensor loss = scale(sum_all(w), 1000.0);
  backward(loss);
  opt.step();
  CHECK(opt.last_grad_norm() == doctest::Approx(1000.0));
  // post-clip gradient is exactly 1, so the first Adam update is lr-sized
  CHECK(std::fabs(w.data()[0] + 1.0) < 1e-6);
}

TEST_CASE("adam state round-trips through a checkpoint") {
  Rng rng(9);
  ParamStore a_store;
  a_store.add_randn("w", {3, 2}, rng, 0.7);
  Adam a_opt(a_store, {.lr = 0.05});

  auto run_steps = [](ParamStore& s, Adam& opt, int n) {
    for (int i = 0; i < n; ++i) {
      s.zero_grad();
      Tensor loss = sum_all(mul(s.at("w"), s.at("w")));
      backward(loss);
      opt.step();
    }
  };
  run_steps(a_store, a_opt, 5);

  // snapshot params + optimizer state
  auto items = a_store.items();
  auto state = a_opt.state_tensors();
  std::vector<std::pair<std::string, Tensor>> all(items);
  all.insert(all.end(), state.begin(), state.end());
  const std::string path = temp_path("atd_adam_state.bin");
  save_checkpoint(path, all, {});

  // continue original for 5 more steps
  run_steps(a_store, a_opt, 5);

  // restore into fresh objects and run the same 5 steps
  Checkpoint ckpt = load_checkpoint(path);
  ParamStore b_store;
  b_store.add("w", Tensor::from_data(ckpt.tensor("w").shape(),
                                     {ckpt.tensor("w").data().begin(),
                                      ckpt.tensor("w").data().end()},
                                     true));
  Adam b_opt(b_store, {.lr = 0.05});
  b_opt.restore_state([&](const std::string& n) { return ckpt.tensor(n); });
  run_steps(b_store, b_opt, 5);

  const auto wa = a_store.at("w").data();
  const auto wb = b_store.at("w").data();
  for (size_t i = 0; i < wa.size(); ++i) CHECK(wa[i] == wb[i]);
  std::filesystem::remove(path);
}

TEST_CASE("shadow stores share data and merge grads in order") {
  Rng rng(5);
  ParamStore main;
  main.add_randn("w", {4}, rng, 1.0);

  ParamStore s1 = main.shadow();
  ParamStore s2 = main.shadow();
  CHECK(s1.at("w").data().data() == main.at("w").data().data());

  backward(sum_all(s1.at("w")));
  backward(scale(sum_all(s2.at("w")), 2.0));
  main.zero_grad();
  main.accumulate_grads_from(s1);
  main.accumulate_grads_from(s2);
  for (double g : main.at("w").grad()) CHECK(g == doctest::Approx(3.0));
}
