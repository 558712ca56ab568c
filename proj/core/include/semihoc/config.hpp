#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace semihoc {

enum class Method { kSemiHoc, kSemiHocNoGate, kSupervised, kSslNode, kSslPerDepth, kSplOracle };

std::string_view to_string(Method m);
/// Throws InputError listing the valid names.
Method parse_method(std::string_view name);

struct TrainConfig {
  Method method = Method::kSemiHoc;
  int epochs = 400;
  int labeled_batch_size = 128;
  int unlabeled_batch_ratio = 4;
  double learning_rate = 0.01;
  double dropout = 0.3;
  double weight_decay = 1e-3;
  double sgd_momentum = 0.9;
  double ema_momentum = 0.999;
  double tau = 0.95;
  int gate_bin_width = 1;
  double gate_drop_threshold = 0.01;
  bool age_gating = true;
  int hidden_width = 512;
  std::uint64_t seed = 0;
  int eval_every = 0;        // 0: never
  int checkpoint_every = 0;  // 0: final checkpoint only

  /// semihoc-no-gate folds into semihoc with gating off.
  bool gating_active() const { return method == Method::kSemiHoc && age_gating; }
  /// Label written into the metrics CSV.
  std::string method_label() const;

  void validate() const;

  /// JSON object with exactly the keys below; unknown keys are rejected.
  std::string to_json() const;
  static TrainConfig from_json(std::string_view text);
  /// Applies a single `key=value`-style override, value given as JSON text or a bare word.
  void set(std::string_view key, std::string_view value);

  static const std::vector<std::string>& keys();

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace semihoc
