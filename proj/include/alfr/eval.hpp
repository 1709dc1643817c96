#pragma once

// Post-hoc probes: freshly trained classifiers predicting S from a frozen
// representation, scored on a held-out part of the evaluation slice.

#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "alfr/data.hpp"
#include "alfr/fairness.hpp"
#include "alfr/nn.hpp"
#include "alfr/optim.hpp"
#include "alfr/seed.hpp"
#include "alfr/training.hpp"

namespace alfr {

enum class ProbeKind { linear, mlp };

inline const char* to_string(ProbeKind k) { return k == ProbeKind::linear ? "linear" : "mlp"; }

struct ProbeSpec {
  ProbeKind kind = ProbeKind::linear;
  std::size_t epochs = 30;
  std::size_t min_epochs = 10;  // early stopping is not considered before this
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{64};  // ignored for linear probes
  AdamHyper optimizer{1e-2};
  bool standardize = true;  // z-score inputs with training statistics, folded into layer 0

  std::vector<LayerSpec> layer_specs(std::size_t input_dim) const {
    const std::vector<std::size_t> none;
    return mlp_specs(input_dim, kind == ProbeKind::linear ? std::span<const std::size_t>(none) : hidden, 1,
                     Activation::relu, Activation::sigmoid);
  }

  static ProbeSpec linear(std::uint64_t seed = 0) {
    ProbeSpec s;
    s.kind = ProbeKind::linear;
    s.seed = seed;
    return s;
  }

  static ProbeSpec mlp(std::uint64_t seed = 0) {
    ProbeSpec s;
    s.kind = ProbeKind::mlp;
    s.seed = seed;
    return s;
  }
};

struct EvalResult {
  ProbeKind probe_kind = ProbeKind::linear;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::size_t runs = 0;
  std::vector<double> accuracies;  // per repeat, in seed order
};

namespace detail {

// Rewrites layer 0 so the probe accepts raw inputs: W' = W / sigma,
// b' = b - W' mu.
inline DenseNetwork fold_standardization(const DenseNetwork& probe, const Vector& mean, const Vector& scale) {
  std::vector<DenseLayer> layers = probe.layers();
  Matrix& w = layers.front().weights;
  w = w * scale.cwiseInverse().asDiagonal();
  layers.front().bias -= w * mean;
  return DenseNetwork(std::move(layers));
}

}  // namespace detail

/// Trains a probe on (representation, labels) by descending cross-entropy
/// with Adam. The representation is only read.
inline DenseNetwork train_probe(const Matrix& representation, std::span<const std::uint8_t> labels,
                                const ProbeSpec& spec) {
  if (static_cast<std::size_t>(representation.rows()) != labels.size())
    throw ShapeError("train_probe: " + std::to_string(representation.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw std::invalid_argument("train_probe: empty training set");
  if (spec.epochs == 0 || spec.batch_size == 0) throw std::invalid_argument("train_probe: epochs and batch_size must be >= 1");
  const Labels S(labels.begin(), labels.end());

  Vector mean = Vector::Zero(representation.cols());
  Vector scale = Vector::Ones(representation.cols());
  Matrix inputs = representation;
  if (spec.standardize) {
    mean = representation.colwise().mean().transpose();
    const Matrix centered = representation.rowwise() - mean.transpose();
    scale = (centered.colwise().squaredNorm() / static_cast<double>(representation.rows())).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j)
      if (!(scale(j) > 1e-12)) scale(j) = 1.0;
    inputs = centered * scale.cwiseInverse().asDiagonal();
  }

  auto probe = init_network(spec.layer_specs(static_cast<std::size_t>(representation.cols())),
                            derive_seed(spec.seed, SeedStream::probe));
  auto state = AdamState::for_network(probe, spec.optimizer);
  std::vector<double> train_acc;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    detail::train_classifier_epoch(probe, state, inputs, S, spec.batch_size,
                                   derive_seed(spec.seed, SeedStream::shuffle, epoch));
    train_acc.push_back(accuracy(predict(probe, inputs), S));
    const std::size_t n = train_acc.size();
    if (n >= std::max<std::size_t>(spec.min_epochs, 4) && std::abs(train_acc[n - 1] - train_acc[n - 4]) < 1e-4) break;
  }
  return spec.standardize ? detail::fold_standardization(probe, mean, scale) : probe;
}

/// Mean and (sample) standard deviation of per-repeat held-out probe
/// accuracy. Repeat r re-splits the rows and re-initializes the probe from
/// seeds derived from (spec.seed, r).
inline std::vector<EvalResult> evaluate_representation(const Matrix& representation, const Labels& labels,
                                                       std::span<const ProbeSpec> specs, std::size_t repeats,
                                                       double probe_train_fraction = 0.7) {
  if (representation.rows() == 0 || labels.empty()) throw std::invalid_argument("evaluation set is empty");
  if (static_cast<std::size_t>(representation.rows()) != labels.size())
    throw ShapeError("evaluation representation and labels differ in length");
  if (repeats == 0) throw std::invalid_argument("repeats must be >= 1");
  LabeledDataset rep{representation, labels, "representation"};

  std::vector<EvalResult> results;
  for (const auto& spec : specs) {
    std::vector<std::future<double>> runs;
    for (std::size_t r = 0; r < repeats; ++r) {
      runs.push_back(std::async(std::launch::async, [&rep, spec, r, probe_train_fraction] {
        const auto [train, test] = split(rep, SplitSpec{probe_train_fraction, derive_seed(spec.seed, SeedStream::split, r)});
        ProbeSpec run_spec = spec;
        run_spec.seed = derive_seed(spec.seed, SeedStream::probe, r);
        const auto probe = train_probe(train.X, train.S, run_spec);
        return accuracy(predict(probe, test.X), test.S);
      }));
    }
    EvalResult res;
    res.probe_kind = spec.kind;
    for (auto& f : runs) res.accuracies.push_back(f.get());
    res.runs = res.accuracies.size();
    res.mean_accuracy = std::accumulate(res.accuracies.begin(), res.accuracies.end(), 0.0) / static_cast<double>(res.runs);
    if (res.runs > 1) {
      double ss = 0.0;
      for (double a : res.accuracies) ss += (a - res.mean_accuracy) * (a - res.mean_accuracy);
      res.std_accuracy = std::sqrt(ss / static_cast<double>(res.runs - 1));
    }
    results.push_back(std::move(res));
  }
  return results;
}

/// Probes trained on encode(stack, eval_data.X). The caller keeps
/// eval_data disjoint from the training slice.
inline std::vector<EvalResult> evaluate_censoring(const EncoderStack& stack, const LabeledDataset& eval_data,
                                                  std::span<const ProbeSpec> specs, std::size_t repeats,
                                                  double probe_train_fraction = 0.7) {
  if (eval_data.rows() == 0) throw std::invalid_argument("evaluate_censoring: empty evaluation set");
  return evaluate_representation(stack.encode(eval_data.X), eval_data.S, specs, repeats, probe_train_fraction);
}

/// MSE of d(e(X)) against X. With batch_size > 0 the set is processed in
/// consecutive chunks and the row-weighted mean is returned.
inline double reconstruction_error(const EncoderStack& stack, const DenseNetwork& decoder, const LabeledDataset& data,
                                   std::size_t batch_size = 0) {
  if (data.rows() == 0) throw std::invalid_argument("reconstruction_error: empty data");
  if (batch_size == 0 || batch_size >= data.rows())
    return mse_loss(censor_original(stack, decoder, data.X), data.X).value;
  double total = 0.0;
  for (std::size_t start = 0; start < data.rows(); start += batch_size) {
    const auto len = static_cast<Eigen::Index>(std::min(batch_size, data.rows() - start));
    const Matrix chunk = data.X.middleRows(static_cast<Eigen::Index>(start), len);
    total += mse_loss(censor_original(stack, decoder, chunk), chunk).value * static_cast<double>(len);
  }
  return total / static_cast<double>(data.rows());
}

}  // namespace alfr
