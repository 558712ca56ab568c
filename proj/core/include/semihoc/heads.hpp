#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "semihoc/hierarchy.hpp"
#include "semihoc/rng.hpp"

namespace semihoc {

enum class Mode { kTrain, kEval };

struct AffineLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Parameters (or gradients, or momentum buffers) of one head.
struct HeadParams {
  std::vector<AffineLayer> layers;

  HeadParams zeros_like() const;
  void set_zero();
  std::size_t parameter_count() const;
  bool same_shape(const HeadParams& other) const;
  /// Flat views, layer by layer, weight before bias.
  std::vector<double*> coefficients();
  std::vector<const double*> coefficients() const;
};

inline constexpr int kHeadLayers = 4;
inline constexpr double kLogitClamp = 50.0;

/// Depth-specific classifier: four affine layers with ReLU in between, softmax
/// on top. Inputs are column vectors; a batch is one column per sample.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(int depth, int input_dim, int hidden_width, int output_dim, double dropout_rate);

  int depth() const { return depth_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int hidden_width() const { return hidden_width_; }
  double dropout_rate() const { return dropout_rate_; }

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(Rng& rng);

  HeadParams params;

 private:
  int depth_ = 0;
  int input_dim_ = 0;
  int hidden_width_ = 0;
  int output_dim_ = 0;
  double dropout_rate_ = 0.0;
};

/// Inverted-dropout keep masks (0 or 1/(1-rate)) for the input and each hidden
/// activation. Empty `sites` means no dropout.
struct DropoutMasks {
  std::vector<Eigen::MatrixXd> sites;  // kHeadLayers entries when active
};

/// Draws masks for a batch. Samples are drawn column by column so a sample's
/// mask does not depend on the columns after it.
DropoutMasks sample_dropout_masks(const MlpHead& head, Eigen::Index batch, Rng& rng);

struct ForwardPass {
  std::vector<Eigen::MatrixXd> layer_inputs;  // post-dropout input of each layer
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::MatrixXd logits;  // clamped
  Eigen::MatrixXd log_probs;
  Eigen::MatrixXd probs;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> clamped;
};

/// `masks == nullptr` is evaluation mode. Throws InputError on a width mismatch.
ForwardPass forward(const MlpHead& head, const Eigen::MatrixXd& inputs, const DropoutMasks* masks);

/// Accumulates parameter gradients into `grads` given dLoss/dLogits (pre-clamp
/// gradients are zero where the clamp is active).
void backward(const MlpHead& head, const ForwardPass& pass, const DropoutMasks* masks,
              const Eigen::MatrixXd& dlogits, HeadParams& grads);

/// -sum_k q_k log p_k.
double cross_entropy(std::span<const double> target, const Eigen::Ref<const Eigen::VectorXd>& log_probs);

struct LossAndGrad {
  double loss = 0.0;
  HeadParams grads;
};

/// Single-sample soft-target cross-entropy and its gradient. In train mode the
/// dropout masks are drawn from `rng`.
LossAndGrad ce_loss_and_grad(const MlpHead& head, std::span<const double> features,
                             std::span<const double> target, Mode mode, Rng* rng);
/// Same with an explicit (frozen) mask set; nullptr means eval mode.
LossAndGrad ce_loss_and_grad(const MlpHead& head, std::span<const double> features,
                             std::span<const double> target, const DropoutMasks* masks);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-3;
};

/// v <- mu v + (scale g + wd theta); theta <- theta - lr v.
void sgd_step(HeadParams& params, HeadParams& velocity, const HeadParams& grads, const SgdConfig& config,
              double scale = 1.0);

/// teacher <- m teacher + (1 - m) student.
void ema_update(HeadParams& teacher, const HeadParams& student, double momentum);

/// Student/teacher head pairs, one per depth 1..D, plus SGD momentum buffers.
struct DepthHeads {
  std::vector<MlpHead> students;  // index d - 1
  std::vector<MlpHead> teachers;
  std::vector<HeadParams> velocity;

  static DepthHeads create(const Hierarchy& hierarchy, int input_dim, int hidden_width, double dropout_rate,
                           Rng& init_rng);
  int depth_count() const { return static_cast<int>(students.size()); }
};

}  // namespace semihoc
