#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "semihoc/hierarchy.hpp"
#include "semihoc/prohoc.hpp"
#include "semihoc/spl.hpp"

namespace semihoc {

/// Balanced mean hierarchical distance. Each component is the macro average,
/// over ground-truth classes present, of the per-class mean tree distance.
/// ID classes are leaves in C^id, OOD classes are internal nodes. A component
/// with no samples is absent and so is mix.
struct BmhdResult {
  std::optional<double> id;
  std::optional<double> ood;
  std::optional<double> mix;
};

/// Samples whose truth is kUnknownNode are skipped.
BmhdResult bmhd(std::span<const NodeId> predictions, std::span<const NodeId> truths, const Hierarchy& hierarchy);

enum class PredictedSubset { kId, kOod };

/// Rows: underprediction distance Dist(LCA, y). Columns: overprediction
/// distance Dist(LCA, f(x)). Cells are percentages of the subset.
struct DecompositionMatrix {
  int size = 0;  // rows == cols == max_depth + 1
  std::size_t count = 0;
  std::vector<double> percent;  // row-major

  double at(int under, int over) const { return percent[static_cast<std::size_t>(under * size + over)]; }
};

/// The subset is chosen by the prediction: an ID leaf or anything else.
DecompositionMatrix decomposition_matrix(std::span<const NodeId> predictions, std::span<const NodeId> truths,
                                         const Hierarchy& hierarchy, PredictedSubset subset);

struct PurityDepth {
  double purity = 0.0;
  double average_depth = 0.0;
  std::size_t assigned = 0;
};

/// Judged at each sample's deepest chain node; empty chains are skipped.
std::optional<PurityDepth> spl_purity_and_depth(std::span<const SplChain> chains, std::span<const NodeId> truths,
                                                const Hierarchy& hierarchy);

/// One first assignment of a (node, sample) pair, for gate analysis.
struct AssignmentRecord {
  NodeId node = 0;
  std::uint64_t sample = 0;
  Epoch epoch = 0;
  bool correct = false;  // ground truth inside Subtree(node)
  bool passed = false;   // not blocked by the gate when assigned

  bool operator==(const AssignmentRecord&) const = default;
};

struct GateStats {
  double fpr = 0.0;
  double coverage = 0.0;
  std::size_t total = 0;
  std::size_t incorrect = 0;
  bool no_incorrect = false;  // fpr reported as 0
};

GateStats gate_fpr_coverage(std::span<const AssignmentRecord> records);

struct ScoredPrediction {
  double confidence = 0.0;
  bool correct = false;
};

struct ConfidenceBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double frequency = 0.0;
  std::optional<double> accuracy;
};

inline constexpr int kDefaultConfidenceBins = 30;

/// Equal-width bins over [0, 1]; confidence 1 falls into the top bin.
std::vector<ConfidenceBin> confidence_accuracy_bins(std::span<const ScoredPrediction> predictions, int bins);

/// Fused prediction for one sample, with the subtree confidence chain along
/// the root-to-prediction path.
struct PredictionRecord {
  std::uint64_t sample_id = 0;
  NodeId truth = kUnknownNode;
  NodeId predicted = 0;
  double node_confidence = 0.0;
  std::vector<std::pair<NodeId, double>> path;  // (node, subtree confidence), root first

  double subtree_confidence() const { return path.empty() ? 0.0 : path.back().second; }
};

PredictionRecord make_prediction(std::uint64_t sample_id, NodeId truth, const HierarchicalDistribution& dist,
                                 const Hierarchy& hierarchy);

enum class ConfidenceMode { kNode, kSubtree };

struct EvalReport {
  BmhdResult bmhd;
  DecompositionMatrix id_predicted;
  DecompositionMatrix ood_predicted;
  // [mode][subset]: node/subtree x ID-predicted/OOD-predicted
  std::vector<ConfidenceBin> calibration[2][2];
  std::size_t evaluated = 0;
};

/// Records with unknown truth are ignored. In node mode a prediction is
/// correct when it equals the truth; in subtree mode when the truth lies in
/// Subtree(prediction).
EvalReport evaluate(std::span<const PredictionRecord> records, const Hierarchy& hierarchy,
                    int bins = kDefaultConfidenceBins);

/// Writes summary.csv, decomposition.csv and calibration.csv into `dir`.
void write_eval_csvs(const EvalReport& report, const std::filesystem::path& dir);

/// `sample_id<TAB>predicted<TAB>p(predicted)<TAB>node:conf,node:conf,...`
void write_prediction_dump(std::ostream& out, std::span<const PredictionRecord> records, const Hierarchy& hierarchy);
/// Truth is filled from `truth_by_id` when present.
std::vector<PredictionRecord> read_prediction_dump(std::istream& in, const Hierarchy& hierarchy,
                                                   const std::unordered_map<std::uint64_t, NodeId>& truth_by_id);

/// Shortest round-trippable decimal text, used for every CSV number.
std::string format_number(double v);

}  // namespace semihoc
