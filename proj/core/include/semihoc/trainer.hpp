#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semihoc/config.hpp"
#include "semihoc/datagen.hpp"
#include "semihoc/heads.hpp"
#include "semihoc/hierarchy.hpp"
#include "semihoc/metrics.hpp"
#include "semihoc/rng.hpp"
#include "semihoc/spl.hpp"

namespace semihoc {

/// Everything that changes during training. Together with the config and the
/// inputs it determines the rest of the run.
struct TrainerState {
  Epoch epoch = 0;  // completed epochs
  DepthHeads heads;
  SplLog log;
  AgeGateState gate;
  std::vector<AssignmentRecord> assignments;  // first assignments, ground truth known
  Rng unlabeled_rng;
  Rng labeled_rng;
  std::vector<Rng> dropout_rngs;  // per depth
  std::vector<std::size_t> labeled_order;
  std::size_t labeled_cursor = 0;
};

/// Losses of one optimizer step. Components are already normalized, so the
/// depth-d objective is labeled[d] + unlabeled[d].
struct StepResult {
  std::vector<double> labeled;    // l_d^l / N
  std::vector<double> unlabeled;  // l_d^u / M
  std::size_t labeled_count = 0;    // N
  std::size_t unlabeled_count = 0;  // M
  std::size_t spl_count = 0;
  std::size_t gated_count = 0;
};

struct EpochReport {
  Epoch epoch = 0;
  std::string method;
  std::vector<double> labeled_loss;    // mean over steps, per depth
  std::vector<double> unlabeled_loss;  // mean over steps, per depth
  std::vector<std::size_t> spl_per_node;
  std::size_t spl_count = 0;
  std::size_t gated_count = 0;
  std::optional<double> coverage;
  std::optional<double> purity;     // OOD unlabeled samples, last chain of the epoch
  std::optional<double> avg_depth;
  std::optional<BmhdResult> eval;   // teacher on the test split
  double wall_seconds = 0.0;

  double loss(int d) const { return labeled_loss[static_cast<std::size_t>(d)] + unlabeled_loss[static_cast<std::size_t>(d)]; }
};

class Trainer {
 public:
  /// Throws InputError when the dataset does not fit the hierarchy or lacks
  /// labeled samples, and DataError for spl-oracle without unlabeled truth.
  Trainer(const Hierarchy& hierarchy, const FeatureDataset& dataset, TrainConfig config);
  /// Continues from a saved state.
  Trainer(const Hierarchy& hierarchy, const FeatureDataset& dataset, TrainConfig config, TrainerState state);

  EpochReport run_epoch();

  /// One optimizer step on explicit batches (dataset row indices).
  StepResult train_step(std::span<const std::size_t> labeled, std::span<const std::size_t> unlabeled);

  const TrainConfig& config() const { return config_; }
  const TrainerState& state() const { return state_; }
  TrainerState& mutable_state() { return state_; }
  const Hierarchy& hierarchy() const { return hierarchy_; }

  /// Keeps every cutoff at kNoCutoff while still running the gate.
  void freeze_cutoffs(bool on) { freeze_cutoffs_ = on; }
  /// Upper bound on worker threads (one depth per worker). 0 means one per depth.
  void set_threads(unsigned n) { threads_ = n; }

 private:
  struct Target {
    std::vector<double> sum;  // summed targets over C_d
    int terms = 0;
  };

  std::vector<std::vector<Target>> unlabeled_targets(std::span<const std::size_t> unlabeled, StepResult& result);
  void add_node_terms(std::vector<std::vector<Target>>& per_depth, std::size_t col, NodeId node, bool all_depths) const;
  std::vector<std::size_t> next_labeled_batch();

  const Hierarchy& hierarchy_;
  const FeatureDataset& dataset_;
  TrainConfig config_;
  TrainerState state_;
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::vector<bool> ood_truth_;  // per dataset row: ground truth is an internal node
  std::vector<SplChain> last_chain_;  // per dataset row, reset every epoch
  std::vector<std::size_t> spl_per_node_;
  std::vector<std::vector<std::vector<std::size_t>>> supports_;  // [d - 1][node]: S_d(node) as depth indices
  bool freeze_cutoffs_ = false;
  unsigned threads_ = 0;
};

/// Fresh state: He-initialized heads (teacher = student) and seeded streams.
TrainerState initial_state(const Hierarchy& hierarchy, const FeatureDataset& dataset, const TrainConfig& config);

/// Teacher-head outputs (eval mode) for the given rows, one matrix per depth,
/// one column per row.
std::vector<Eigen::MatrixXd> teacher_outputs(const DepthHeads& heads, const FeatureDataset& dataset,
                                             std::span<const std::size_t> rows, unsigned threads = 0);

/// Fused teacher predictions for the given rows.
std::vector<PredictionRecord> predict(const DepthHeads& heads, const Hierarchy& hierarchy,
                                      const FeatureDataset& dataset, std::span<const std::size_t> rows,
                                      unsigned threads = 0);

/// Worker cap from SEMIHOC_THREADS, 0 when unset.
unsigned threads_from_env();

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;     // metrics.csv, config.json, checkpoints
  std::optional<std::filesystem::path> resume_from;
  unsigned threads = 0;
  bool freeze_cutoffs = false;
  Epoch stop_after = 0;  // stop early after this epoch, 0: run to config.epochs
  std::function<void(const EpochReport&)> on_epoch;
};

struct RunResult {
  std::vector<EpochReport> reports;  // epochs run in this invocation
  std::vector<std::string> csv_rows; // whole run, header excluded
  TrainerState state;
};

std::string metrics_csv_header(int depths);
std::string metrics_csv_row(const EpochReport& report);

/// Trains to `config.epochs`, writing metrics rows and checkpoints when an
/// output directory is given. A resumed run reproduces the remaining epochs of
/// the uninterrupted run exactly.
RunResult run_training(const TrainConfig& config, const FeatureDataset& dataset, const Hierarchy& hierarchy,
                       const RunOptions& options = {});

}  // namespace semihoc
