#pragma once

// Guessing baseline, accuracy, dampening, and the hypothesis-space test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "alfr/nn.hpp"

namespace alfr {

/// A value in [0,1] measuring a classifier's advantage over informed guessing.
class DampeningValue {
 public:
  constexpr DampeningValue() = default;
  explicit DampeningValue(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("dampening value outside [0,1]");
  }
  constexpr double value() const { return value_; }
  constexpr operator double() const { return value_; }

 private:
  double value_ = 0.0;
};

enum class ScoreKind { adversary_accuracy };

struct HypothesisConstraint {
  ScoreKind score_kind = ScoreKind::adversary_accuracy;
  double threshold = 0.6;

  void validate() const {
    if (!(threshold >= 0.5 && threshold <= 1.0))
      throw std::invalid_argument("accuracy threshold must lie in [0.5, 1], got " + std::to_string(threshold));
  }
};

/// Best accuracy achievable from label frequencies alone: max(#1, #0) / n.
inline double guess_accuracy(std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw std::invalid_argument("guess_accuracy: empty label vector");
  std::size_t ones = 0;
  for (auto s : labels) {
    if (s > 1) throw std::invalid_argument("guess_accuracy: non-binary label");
    ones += s;
  }
  const std::size_t zeros = labels.size() - ones;
  return static_cast<double>(std::max(ones, zeros)) / static_cast<double>(labels.size());
}

/// Fraction of rows where (prob >= threshold) matches the label. A
/// probability exactly at the threshold predicts class 1.
inline double accuracy(std::span<const double> predicted_prob, std::span<const std::uint8_t> labels,
                       double decision_threshold = 0.5) {
  if (predicted_prob.size() != labels.size())
    throw std::invalid_argument("accuracy: " + std::to_string(predicted_prob.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t predicted = predicted_prob[i] >= decision_threshold ? 1 : 0;
    correct += predicted == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double accuracy(const Matrix& predicted_prob, std::span<const std::uint8_t> labels,
                       double decision_threshold = 0.5) {
  if (predicted_prob.cols() != 1) throw std::invalid_argument("accuracy: expected one probability column");
  return accuracy(std::span<const double>(predicted_prob.data(), static_cast<std::size_t>(predicted_prob.rows())),
                  labels, decision_threshold);
}

/// max(0, acc - g) / (1 - g), and 0 when g == 1.
inline DampeningValue dampening(double acc, std::span<const std::uint8_t> labels) {
  if (!(acc >= 0.0 && acc <= 1.0)) throw std::invalid_argument("dampening: accuracy outside [0,1]");
  const double g = guess_accuracy(labels);
  if (g == 1.0) return DampeningValue(0.0);
  return DampeningValue(std::min(1.0, std::max(0.0, acc - g) / (1.0 - g)));
}

/// True iff the score is at or below the threshold.
inline bool hypothesis_check(double score, const HypothesisConstraint& constraint) {
  if (!(score >= 0.0 && score <= 1.0)) throw std::invalid_argument("hypothesis_check: score outside [0,1]");
  return score <= constraint.threshold;
}

}  // namespace alfr
