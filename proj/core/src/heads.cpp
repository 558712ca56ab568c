#include "semihoc/heads.hpp"

#include <cmath>
#include <random>

#include "semihoc/error.hpp"

namespace semihoc {

HeadParams HeadParams::zeros_like() const {
  HeadParams out = *this;
  out.set_zero();
  return out;
}

void HeadParams::set_zero() {
  for (auto& l : layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

std::size_t HeadParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool HeadParams::same_shape(const HeadParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size())
      return false;
  }
  return true;
}

std::vector<double*> HeadParams::coefficients() {
  std::vector<double*> out;
  out.reserve(parameter_count());
  for (auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  }
  return out;
}

std::vector<const double*> HeadParams::coefficients() const {
  std::vector<const double*> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  }
  return out;
}

MlpHead::MlpHead(int depth, int input_dim, int hidden_width, int output_dim, double dropout_rate)
    : depth_(depth),
      input_dim_(input_dim),
      hidden_width_(hidden_width),
      output_dim_(output_dim),
      dropout_rate_(dropout_rate) {
  if (input_dim < 1 || hidden_width < 1 || output_dim < 1) throw InputError("head widths must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
  const int widths[kHeadLayers + 1] = {input_dim, hidden_width, hidden_width, hidden_width, output_dim};
  for (int l = 0; l < kHeadLayers; ++l)
    params.layers.push_back({Eigen::MatrixXd::Zero(widths[l + 1], widths[l]), Eigen::VectorXd::Zero(widths[l + 1])});
}

void MlpHead::init_he_uniform(Rng& rng) {
  for (auto& l : params.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = dist(rng);
    l.bias.setZero();
  }
}

DropoutMasks sample_dropout_masks(const MlpHead& head, Eigen::Index batch, Rng& rng) {
  DropoutMasks masks;
  const double rate = head.dropout_rate();
  if (rate <= 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - rate);
  const Eigen::Index widths[kHeadLayers] = {head.input_dim(), head.hidden_width(), head.hidden_width(),
                                            head.hidden_width()};
  for (auto w : widths) masks.sites.emplace_back(w, batch);
  std::bernoulli_distribution keep(1.0 - rate);
  for (Eigen::Index j = 0; j < batch; ++j)
    for (auto& site : masks.sites)
      for (Eigen::Index i = 0; i < site.rows(); ++i) site(i, j) = keep(rng) ? keep_scale : 0.0;
  return masks;
}

ForwardPass forward(const MlpHead& head, const Eigen::MatrixXd& inputs, const DropoutMasks* masks) {
  if (inputs.rows() != head.input_dim())
    throw InputError("feature dimension " + std::to_string(inputs.rows()) + " does not match head input " +
                     std::to_string(head.input_dim()));
  const bool dropout = masks != nullptr && !masks->sites.empty();
  if (dropout && masks->sites.front().cols() != inputs.cols()) throw InputError("dropout mask batch size mismatch");

  ForwardPass pass;
  pass.layer_inputs.reserve(kHeadLayers);
  pass.pre_activations.reserve(kHeadLayers - 1);
  pass.layer_inputs.push_back(dropout ? Eigen::MatrixXd(inputs.cwiseProduct(masks->sites[0])) : inputs);
  for (int l = 0; l < kHeadLayers; ++l) {
    const auto& layer = head.params.layers[static_cast<std::size_t>(l)];
    Eigen::MatrixXd z = layer.weight * pass.layer_inputs.back();
    z.colwise() += layer.bias;
    if (l + 1 == kHeadLayers) {
      pass.clamped = z.array().abs() > kLogitClamp;
      pass.logits = z.cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp);
      break;
    }
    Eigen::MatrixXd h = z.cwiseMax(0.0);
    if (dropout) h = h.cwiseProduct(masks->sites[static_cast<std::size_t>(l + 1)]);
    pass.pre_activations.push_back(std::move(z));
    pass.layer_inputs.push_back(std::move(h));
  }

  pass.log_probs.resize(pass.logits.rows(), pass.logits.cols());
  for (Eigen::Index j = 0; j < pass.logits.cols(); ++j) {
    const auto col = pass.logits.col(j);
    const double m = col.maxCoeff();
    const double lse = m + std::log((col.array() - m).exp().sum());
    pass.log_probs.col(j) = col.array() - lse;
  }
  pass.probs = pass.log_probs.array().exp().matrix();
  return pass;
}

void backward(const MlpHead& head, const ForwardPass& pass, const DropoutMasks* masks,
              const Eigen::MatrixXd& dlogits, HeadParams& grads) {
  const bool dropout = masks != nullptr && !masks->sites.empty();
  Eigen::MatrixXd g = pass.clamped.select(Eigen::MatrixXd::Zero(dlogits.rows(), dlogits.cols()), dlogits);
  for (int l = kHeadLayers - 1; l >= 0; --l) {
    const auto idx = static_cast<std::size_t>(l);
    grads.layers[idx].weight.noalias() += g * pass.layer_inputs[idx].transpose();
    grads.layers[idx].bias += g.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd da = head.params.layers[idx].weight.transpose() * g;
    if (dropout) da = da.cwiseProduct(masks->sites[idx]);
    g = (pass.pre_activations[idx - 1].array() > 0.0).select(da, 0.0);
  }
}

double cross_entropy(std::span<const double> target, const Eigen::Ref<const Eigen::VectorXd>& log_probs) {
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k)
    if (target[k] != 0.0) loss -= target[k] * log_probs(static_cast<Eigen::Index>(k));
  return loss;
}

LossAndGrad ce_loss_and_grad(const MlpHead& head, std::span<const double> features, std::span<const double> target,
                             const DropoutMasks* masks) {
  if (target.size() != static_cast<std::size_t>(head.output_dim()))
    throw InputError("target width does not match head output");
  Eigen::MatrixXd x(head.input_dim(), 1);
  if (features.size() != static_cast<std::size_t>(head.input_dim()))
    throw InputError("feature dimension does not match head input");
  for (std::size_t i = 0; i < features.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = features[i];

  const ForwardPass pass = forward(head, x, masks);
  Eigen::MatrixXd dz = pass.probs;
  for (std::size_t k = 0; k < target.size(); ++k) dz(static_cast<Eigen::Index>(k), 0) -= target[k];

  LossAndGrad out{cross_entropy(target, pass.log_probs.col(0)), head.params.zeros_like()};
  backward(head, pass, masks, dz, out.grads);
  return out;
}

LossAndGrad ce_loss_and_grad(const MlpHead& head, std::span<const double> features, std::span<const double> target,
                             Mode mode, Rng* rng) {
  if (mode == Mode::kEval) return ce_loss_and_grad(head, features, target, nullptr);
  if (rng == nullptr) throw InputError("train mode requires a dropout RNG");
  const DropoutMasks masks = sample_dropout_masks(head, 1, *rng);
  return ce_loss_and_grad(head, features, target, &masks);
}

void sgd_step(HeadParams& params, HeadParams& velocity, const HeadParams& grads, const SgdConfig& config,
              double scale) {
  if (!params.same_shape(grads) || !params.same_shape(velocity)) throw InputError("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    auto& v = velocity.layers[i];
    const auto& g = grads.layers[i];
    v.weight = config.momentum * v.weight + scale * g.weight + config.weight_decay * p.weight;
    v.bias = config.momentum * v.bias + scale * g.bias + config.weight_decay * p.bias;
    p.weight -= config.learning_rate * v.weight;
    p.bias -= config.learning_rate * v.bias;
  }
}

void ema_update(HeadParams& teacher, const HeadParams& student, double momentum) {
  if (!teacher.same_shape(student)) throw InputError("ema_update: shape mismatch");
  for (std::size_t i = 0; i < teacher.layers.size(); ++i) {
    auto& t = teacher.layers[i];
    const auto& s = student.layers[i];
    t.weight = momentum * t.weight + (1.0 - momentum) * s.weight;
    t.bias = momentum * t.bias + (1.0 - momentum) * s.bias;
  }
}

DepthHeads DepthHeads::create(const Hierarchy& hierarchy, int input_dim, int hidden_width, double dropout_rate,
                              Rng& init_rng) {
  DepthHeads heads;
  for (int d = 1; d <= hierarchy.max_depth(); ++d) {
    const int classes = static_cast<int>(hierarchy.depth_space(d).members.size());
    MlpHead student(d, input_dim, hidden_width, classes, dropout_rate);
    student.init_he_uniform(init_rng);
    heads.velocity.push_back(student.params.zeros_like());
    heads.teachers.push_back(student);
    heads.students.push_back(std::move(student));
  }
  return heads;
}

}  // namespace semihoc
