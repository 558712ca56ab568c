#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "semihoc/checkpoint.hpp"
#include "semihoc/error.hpp"
#include "semihoc/trainer.hpp"

namespace semihoc {
namespace {

using namespace semihoc::testing;
using Rows = std::vector<std::size_t>;

TrainConfig animal_config(Method m) {
  TrainConfig c;
  c.method = m;
  c.hidden_width = 4;
  c.labeled_batch_size = 4;
  c.unlabeled_batch_ratio = 1;
  c.dropout = 0.0;
  c.seed = 3;
  return c;
}

// Zero weights everywhere; depth-1 bias pins Bird, depth-2 output stays uniform.
void pin_bird(DepthHeads& heads) {
  for (auto* set : {&heads.students, &heads.teachers})
    for (auto& h : *set) h.params.set_zero();
  heads.teachers[0].params.layers.back().bias(1) = 30.0;
}

const Rows kLabeled{0, 1, 2, 3};

TEST(TrainStepTest, ZeroHeadsGiveLogDepthWidth) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  Trainer t(h, ds, animal_config(Method::kSupervised));
  for (auto& s : t.mutable_state().heads.students) s.params.set_zero();
  const auto r = t.train_step(kLabeled, Rows{4, 5, 6});
  EXPECT_NEAR(r.labeled[0], std::log(2.0), 1e-12);
  EXPECT_NEAR(r.labeled[1], std::log(4.0), 1e-12);
  EXPECT_EQ(r.unlabeled_count, 0u);
  EXPECT_EQ(r.unlabeled[0], 0.0);
}

TEST(TrainStepTest, EmptyChainsReduceToSupervised) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  TrainConfig semi = animal_config(Method::kSemiHoc);
  semi.tau = 1.0;
  Trainer a(h, ds, semi), b(h, ds, animal_config(Method::kSupervised));
  const auto ra = a.train_step(kLabeled, Rows{4, 5, 6});
  const auto rb = b.train_step(kLabeled, Rows{4, 5, 6});
  EXPECT_EQ(ra.spl_count, 0u);
  EXPECT_EQ(ra.unlabeled, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(ra.labeled, rb.labeled);
  EXPECT_EQ(a.state().heads.students[1].params.layers[0].weight, b.state().heads.students[1].params.layers[0].weight);
}

TEST(TrainStepTest, InternalSplTrainsOnlyItsDepth) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  Trainer t(h, ds, animal_config(Method::kSemiHoc));
  pin_bird(t.mutable_state().heads);
  const auto r = t.train_step(kLabeled, Rows{6});
  EXPECT_EQ(r.spl_count, 1u);
  EXPECT_GT(r.unlabeled[0], 0.0);
  EXPECT_EQ(r.unlabeled[1], 0.0);
}

TEST(TrainStepTest, OracleMammalChainTrainsOnlyDepthOne) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  Trainer t(h, ds, animal_config(Method::kSplOracle));
  const auto r = t.train_step(kLabeled, Rows{4});
  EXPECT_EQ(r.spl_count, 1u);
  EXPECT_GT(r.unlabeled[0], 0.0);
  EXPECT_EQ(r.unlabeled[1], 0.0);

  const auto leaf = t.train_step(kLabeled, Rows{5});
  EXPECT_EQ(leaf.spl_count, 2u);  // Mammal, Cat
  EXPECT_GT(leaf.unlabeled[1], 0.0);
}

TEST(TrainStepTest, SslNodeSpreadsInternalLabelOverAllDepths) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  Trainer t(h, ds, animal_config(Method::kSslNode));
  pin_bird(t.mutable_state().heads);
  const auto r = t.train_step(kLabeled, Rows{6});
  EXPECT_EQ(r.spl_count, 1u);
  EXPECT_GT(r.unlabeled[0], 0.0);
  EXPECT_NEAR(r.unlabeled[1], std::log(4.0), 1e-12);  // uniform over {Eagle, Junco} against uniform output
}

TEST(TrainStepTest, SslPerDepthUsesConfidentDepthsOnly) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  Trainer t(h, ds, animal_config(Method::kSslPerDepth));
  pin_bird(t.mutable_state().heads);
  const auto r = t.train_step(kLabeled, Rows{6});
  EXPECT_EQ(r.spl_count, 1u);
  EXPECT_GT(r.unlabeled[0], 0.0);
  EXPECT_EQ(r.unlabeled[1], 0.0);
}

TEST(TrainStepTest, LowConfidenceContributesNothing) {
  // Depth-1 output (0.11, 0.89) has normalized entropy 0.5, so p(Root) is
  // about 0.5, p(Bird) about 0.445, and no depth output exceeds 0.89.
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  for (Method m : {Method::kSslNode, Method::kSslPerDepth, Method::kSemiHoc}) {
    Trainer t(h, ds, animal_config(m));
    pin_bird(t.mutable_state().heads);
    t.mutable_state().heads.teachers[0].params.layers.back().bias(1) = std::log(0.89 / 0.11);
    const auto r = t.train_step(kLabeled, Rows{4, 5, 6});
    EXPECT_EQ(r.spl_count, 0u) << to_string(m);
    EXPECT_EQ(r.unlabeled, (std::vector<double>{0.0, 0.0})) << to_string(m);
  }
}

TEST(TrainerTest, SplOracleNeedsUnlabeledTruth) {
  const Hierarchy h = animal_tree();
  FeatureDataset ds = animal_dataset();
  const std::vector<float> x{0.0f, 0.0f};
  ds.add(99, kUnknownNode, Split::kUnlabeled, x);
  EXPECT_THROW(Trainer(h, ds, animal_config(Method::kSplOracle)), DataError);
  EXPECT_NO_THROW(Trainer(h, ds, animal_config(Method::kSemiHoc)));
}

TEST(TrainerTest, NoGateMethodIsSemiHocWithoutGating) {
  const Hierarchy h = animal_tree();
  const FeatureDataset ds = animal_dataset();
  const Trainer t(h, ds, animal_config(Method::kSemiHocNoGate));
  EXPECT_EQ(t.config().method, Method::kSemiHoc);
  EXPECT_FALSE(t.config().gating_active());
  EXPECT_EQ(t.config().method_label(), "semihoc-no-gate");
}

TrainConfig small_config(Method m, std::uint64_t seed) {
  TrainConfig c;
  c.method = m;
  c.epochs = 6;
  c.hidden_width = 8;
  c.labeled_batch_size = 4;
  c.unlabeled_batch_ratio = 2;
  c.learning_rate = 0.05;
  c.ema_momentum = 0.9;
  c.tau = 0.6;
  c.gate_bin_width = 1;
  c.gate_drop_threshold = 0.3;
  c.eval_every = 2;
  c.checkpoint_every = 3;
  c.seed = seed;
  return c;
}

TEST(RunTrainingTest, IdenticalSeedsGiveIdenticalRows) {
  const auto g = small_problem(2);
  const auto a = run_training(small_config(Method::kSemiHoc, 8), g.dataset, g.hierarchy);
  const auto b = run_training(small_config(Method::kSemiHoc, 8), g.dataset, g.hierarchy);
  EXPECT_EQ(a.csv_rows, b.csv_rows);
  const auto c = run_training(small_config(Method::kSemiHoc, 9), g.dataset, g.hierarchy);
  EXPECT_NE(a.csv_rows, c.csv_rows);
}

TEST(RunTrainingTest, ThreadCountDoesNotChangeResults) {
  const auto g = small_problem(2);
  RunOptions one;
  one.threads = 1;
  const auto a = run_training(small_config(Method::kSemiHoc, 4), g.dataset, g.hierarchy, one);
  const auto b = run_training(small_config(Method::kSemiHoc, 4), g.dataset, g.hierarchy);
  EXPECT_EQ(a.csv_rows, b.csv_rows);
}

TEST(RunTrainingTest, ResumeMatchesUninterruptedRun) {
  const auto g = small_problem(5);
  const TrainConfig cfg = small_config(Method::kSemiHoc, 1);
  TempDir full("resume_full"), part("resume_part");
  RunOptions opts;
  opts.out_dir = full.path();
  const auto ref = run_training(cfg, g.dataset, g.hierarchy, opts);

  RunOptions first;
  first.out_dir = part.path();
  first.stop_after = 3;
  run_training(cfg, g.dataset, g.hierarchy, first);
  RunOptions second;
  second.out_dir = part.path();
  second.resume_from = part / "checkpoint_epoch3.bin";
  const auto resumed = run_training(cfg, g.dataset, g.hierarchy, second);

  EXPECT_EQ(resumed.csv_rows, ref.csv_rows);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(part / "metrics.csv"), slurp(full / "metrics.csv"));
  EXPECT_EQ(slurp(part / "final.bin"), slurp(full / "final.bin"));
}

TEST(RunTrainingTest, ResumeRejectsChangedTrainingSetting) {
  const auto g = small_problem(5);
  TempDir dir("resume_reject");
  TrainConfig cfg = small_config(Method::kSemiHoc, 1);
  RunOptions opts;
  opts.out_dir = dir.path();
  opts.stop_after = 3;
  run_training(cfg, g.dataset, g.hierarchy, opts);
  RunOptions again;
  again.resume_from = dir / "final.bin";
  cfg.learning_rate = 0.5;
  EXPECT_THROW(run_training(cfg, g.dataset, g.hierarchy, again), InputError);
  cfg.learning_rate = 0.05;
  cfg.epochs = 8;
  EXPECT_NO_THROW(run_training(cfg, g.dataset, g.hierarchy, again));

  const auto other = small_problem(6);
  ASSERT_NE(other.hierarchy.content_hash(), g.hierarchy.content_hash());
  EXPECT_THROW(run_training(cfg, other.dataset, other.hierarchy, again), DataError);
}

TEST(RunTrainingTest, SupervisedIgnoresUnlabeledData) {
  const auto g = small_problem(3);
  const auto r = run_training(small_config(Method::kSupervised, 2), g.dataset, g.hierarchy);
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.spl_count, 0u);
    for (double u : rep.unlabeled_loss) EXPECT_EQ(u, 0.0);
  }
}

TEST(RunTrainingTest, EvalEveryFillsBmhdColumns) {
  const auto g = small_problem(3);
  const auto r = run_training(small_config(Method::kSemiHoc, 2), g.dataset, g.hierarchy);
  ASSERT_EQ(r.reports.size(), 6u);
  EXPECT_FALSE(r.reports[0].eval.has_value());
  ASSERT_TRUE(r.reports[1].eval.has_value());
  EXPECT_TRUE(r.reports[1].eval->mix.has_value());
}

TEST(MetricsCsvTest, HeaderAndRowWidthsAgree) {
  const auto g = small_problem(3);
  const auto r = run_training(small_config(Method::kSemiHoc, 2), g.dataset, g.hierarchy);
  const std::string header = metrics_csv_header(g.hierarchy.max_depth());
  EXPECT_EQ(header.rfind("epoch,method,loss_l_d1,loss_u_d1,loss_d1", 0), 0u);
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  for (const auto& row : r.csv_rows) EXPECT_EQ(commas(row), commas(header));
}

TEST(ThreadsFromEnvTest, ParsesPositiveIntegers) {
  ::setenv("SEMIHOC_THREADS", "3", 1);
  EXPECT_EQ(threads_from_env(), 3u);
  ::setenv("SEMIHOC_THREADS", "zero", 1);
  EXPECT_THROW(threads_from_env(), InputError);
  ::unsetenv("SEMIHOC_THREADS");
  EXPECT_EQ(threads_from_env(), 0u);
}

}  // namespace
}  // namespace semihoc
