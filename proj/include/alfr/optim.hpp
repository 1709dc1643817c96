#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "alfr/error.hpp"
#include "alfr/nn.hpp"

namespace alfr {

inline constexpr double kProbabilityClamp = 1e-12;

struct LossValue {
  double value = 0.0;
  Matrix gradient;  // d value / d prediction, same shape as the prediction
};

/// Mean over rows of the squared L2 distance between prediction and target.
inline LossValue mse_loss(const Matrix& prediction, const Matrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw ShapeError("mse_loss: prediction is " + std::to_string(prediction.rows()) + "x" +
                     std::to_string(prediction.cols()) + ", target is " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  if (prediction.rows() == 0) throw ShapeError("mse_loss: empty batch");
  const double n = static_cast<double>(prediction.rows());
  Matrix diff = prediction - target;
  LossValue loss;
  loss.value = diff.squaredNorm() / n;
  loss.gradient = (2.0 / n) * diff;
  return loss;
}

inline void check_binary(std::span<const std::uint8_t> labels, const char* who) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 1)
      throw std::invalid_argument(std::string(who) + ": label at index " + std::to_string(i) + " is not 0 or 1");
}

/// Mean binary cross-entropy (positive). Probabilities are clamped into
/// [clamp, 1 - clamp] before logs and in the gradient.
inline LossValue cross_entropy(const Matrix& predicted_prob, std::span<const std::uint8_t> labels,
                               double clamp = kProbabilityClamp) {
  if (predicted_prob.cols() != 1 || static_cast<std::size_t>(predicted_prob.rows()) != labels.size())
    throw ShapeError("cross_entropy: expected a column of " + std::to_string(labels.size()) + " probabilities");
  if (labels.empty()) throw ShapeError("cross_entropy: empty batch");
  check_binary(labels, "cross_entropy");
  const double n = static_cast<double>(labels.size());
  LossValue loss;
  loss.gradient.resize(predicted_prob.rows(), 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < predicted_prob.rows(); ++i) {
    const double p = std::clamp(predicted_prob(i, 0), clamp, 1.0 - clamp);
    if (labels[i] == 1) {
      total -= std::log(p);
      loss.gradient(i, 0) = -1.0 / (p * n);
    } else {
      total -= std::log1p(-p);
      loss.gradient(i, 0) = 1.0 / ((1.0 - p) * n);
    }
  }
  loss.value = total / n;
  return loss;
}

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("adam: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be > 0");
  }
};

struct AdamState {
  GradientSet first_moment;
  GradientSet second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  static AdamState for_network(const DenseNetwork& net, AdamHyper hyper = {}) {
    hyper.validate();
    return AdamState{GradientSet::zeros_like(net), GradientSet::zeros_like(net), 0, hyper};
  }
};

namespace detail {

// Entries whose current gradient is exactly zero keep their value; moments
// still decay for every entry.
template <typename Param>
void adam_update(Param& param, const Param& grad, Param& m, Param& v, double scale, const AdamHyper& h,
                 double bias1, double bias2) {
  m = h.beta1 * m + (1.0 - h.beta1) * scale * grad;
  v = h.beta2 * v + (1.0 - h.beta2) * (scale * grad).cwiseAbs2();
  auto step = (h.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + h.epsilon)).eval();
  param.array() -= ((scale * grad).array() != 0.0).select(step, 0.0);
}

}  // namespace detail

/// Adam with bias correction; `scale` multiplies the gradient before it
/// enters the moments.
inline void scaled_adam_step(DenseNetwork& net, const GradientSet& grads, AdamState& state, double scale) {
  if (!(scale >= 0.0 && scale <= 1.0)) throw std::invalid_argument("scaled_adam_step: scale must be in [0,1]");
  if (net.frozen()) throw FreezeError("adam step applied to a frozen network");
  if (!grads.congruent_with(net)) throw ShapeError("adam step: gradient set does not match network");
  if (!state.first_moment.congruent_with(net) || !state.second_moment.congruent_with(net))
    throw ShapeError("adam step: optimizer state does not match network");
  state.step_count += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < net.depth(); ++i) {
    auto& layer = net.mutable_layer(i);
    detail::adam_update(layer.weights, grads.weights[i], state.first_moment.weights[i],
                        state.second_moment.weights[i], scale, h, bias1, bias2);
    detail::adam_update(layer.bias, grads.biases[i], state.first_moment.biases[i], state.second_moment.biases[i],
                        scale, h, bias1, bias2);
  }
}

inline void adam_step(DenseNetwork& net, const GradientSet& grads, AdamState& state) {
  scaled_adam_step(net, grads, state, 1.0);
}

}  // namespace alfr
