#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "semihoc/datagen.hpp"
#include "semihoc/heads.hpp"
#include "semihoc/prohoc.hpp"
#include "semihoc/spl.hpp"
#include "semihoc/trainer.hpp"

namespace {

using namespace semihoc;

GeneratedData bench_data(int branching, int depth) {
  SyntheticConfig c;
  c.branching = branching;
  c.depth = depth;
  c.dim = 32;
  c.train_per_leaf = 30;
  c.test_per_leaf = 10;
  c.level_scale = 0.5;
  c.seed = 1;
  GeneratedData g = generate(c);
  g.dataset = sample_labeled_subset(g.dataset, g.hierarchy, 10, 1);
  return g;
}

std::vector<std::vector<double>> random_depth_outputs(const Hierarchy& h, Rng& rng) {
  std::gamma_distribution<double> gamma(0.5, 1.0);
  std::vector<std::vector<double>> out;
  for (int d = 1; d <= h.max_depth(); ++d) {
    std::vector<double> p(h.depth_space(d).members.size());
    double sum = 0.0;
    for (auto& v : p) sum += (v = gamma(rng));
    for (auto& v : p) v /= sum;
    out.push_back(std::move(p));
  }
  return out;
}

void BM_Fuse(benchmark::State& state) {
  const auto g = bench_data(static_cast<int>(state.range(0)), 4);
  Rng rng(3);
  const auto outputs = random_depth_outputs(g.hierarchy, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fuse(outputs, g.hierarchy));
  state.counters["nodes"] = static_cast<double>(g.hierarchy.size());
}
BENCHMARK(BM_Fuse)->Arg(3)->Arg(5);

void BM_FuseAndSpls(benchmark::State& state) {
  const auto g = bench_data(3, 4);
  Rng rng(4);
  const auto outputs = random_depth_outputs(g.hierarchy, rng);
  for (auto _ : state) benchmark::DoNotOptimize(compute_spls(fuse(outputs, g.hierarchy), g.hierarchy, 0.95));
}
BENCHMARK(BM_FuseAndSpls);

void BM_HeadForwardBackward(benchmark::State& state) {
  const auto batch = state.range(0);
  MlpHead head(1, 32, static_cast<int>(state.range(1)), 65, 0.1);
  Rng rng(5);
  head.init_he_uniform(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(32, batch);
  const Eigen::MatrixXd dz = Eigen::MatrixXd::Random(65, batch);
  HeadParams grads = head.params.zeros_like();
  for (auto _ : state) {
    const auto masks = sample_dropout_masks(head, batch, rng);
    const auto pass = forward(head, x, &masks);
    backward(head, pass, &masks, dz, grads);
    benchmark::DoNotOptimize(grads.layers[0].weight.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_HeadForwardBackward)->Args({80, 128})->Args({80, 512});

void BM_DetectCutoff(benchmark::State& state) {
  Rng rng(6);
  std::uniform_int_distribution<Epoch> ep(1, 400);
  std::vector<Epoch> epochs(static_cast<std::size_t>(state.range(0)));
  for (auto& e : epochs) e = ep(rng);
  for (auto _ : state) benchmark::DoNotOptimize(detect_cutoff(epochs, 400, 1, 0.01));
}
BENCHMARK(BM_DetectCutoff)->Arg(100)->Arg(10000);

void BM_TrainEpoch(benchmark::State& state) {
  const auto g = bench_data(3, 4);
  TrainConfig c;
  c.method = state.range(0) == 0 ? Method::kSemiHoc : Method::kSupervised;
  c.hidden_width = 128;
  c.labeled_batch_size = 16;
  c.gate_bin_width = 10;
  c.seed = 1;
  Trainer trainer(g.hierarchy, g.dataset, c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch().spl_count);
  state.SetLabel(std::string(to_string(c.method)));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
