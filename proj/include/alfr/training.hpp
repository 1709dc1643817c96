#pragma once

// Autoencoder, joint-loss ALFR, and ALFR-DS (dampened concurrent updates
// with stacked frozen encoders) trainers.
//
// Sign convention: losses are stored as positive cross-entropy. The actor's
// encoder gradient is grad(mse) - w * grad(cross_entropy), where w is alpha
// for ALFR and the batch dampening for ALFR-DS. This is the only place the
// adversary gradient is negated.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alfr/data.hpp"
#include "alfr/error.hpp"
#include "alfr/fairness.hpp"
#include "alfr/nn.hpp"
#include "alfr/optim.hpp"
#include "alfr/seed.hpp"

namespace alfr {

// ------------------------------------------------------------- stack ----

/// Composition of encoders applied in push order. Every encoder except the
/// most recent one is frozen. An empty stack is the identity map.
class EncoderStack {
 public:
  EncoderStack() = default;
  explicit EncoderStack(std::size_t input_dim) : input_dim_(input_dim) {
    if (input_dim == 0) throw ShapeError("encoder stack input dim must be >= 1");
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return encoders_.empty() ? input_dim_ : encoders_.back().output_dim(); }
  std::size_t size() const { return encoders_.size(); }
  bool empty() const { return encoders_.empty(); }

  const DenseNetwork& encoder(std::size_t i) const { return encoders_.at(i); }
  const std::vector<DenseNetwork>& encoders() const { return encoders_; }

  /// The trainable (most recent) encoder.
  DenseNetwork& top() {
    if (encoders_.empty()) throw std::logic_error("empty encoder stack has no top");
    return encoders_.back();
  }

  void push(DenseNetwork encoder) {
    if (encoder.empty()) throw ShapeError("cannot push an empty network");
    if (encoder.input_dim() != output_dim())
      throw ShapeError("encoder input dim " + std::to_string(encoder.input_dim()) + " does not match stack output dim " +
                       std::to_string(output_dim()));
    if (!encoders_.empty()) encoders_.back().freeze();
    encoders_.push_back(std::move(encoder));
  }

  void freeze_top() {
    if (!encoders_.empty()) encoders_.back().freeze();
  }

  Matrix encode(const Matrix& X) const { return encode_first(X, encoders_.size()); }

  /// Output of all encoders below the top one.
  Matrix encode_prefix(const Matrix& X) const { return encode_first(X, encoders_.empty() ? 0 : encoders_.size() - 1); }

 private:
  Matrix encode_first(const Matrix& X, std::size_t count) const {
    if (static_cast<std::size_t>(X.cols()) != input_dim_)
      throw ShapeError("encode: data has " + std::to_string(X.cols()) + " columns, stack expects " +
                       std::to_string(input_dim_));
    Matrix out = X;
    for (std::size_t i = 0; i < count; ++i) out = predict(encoders_[i], out);
    return out;
  }

  std::size_t input_dim_ = 0;
  std::vector<DenseNetwork> encoders_;
};

inline EncoderStack stack_push(EncoderStack stack, DenseNetwork new_encoder) {
  stack.push(std::move(new_encoder));
  return stack;
}

inline Matrix encode(const EncoderStack& stack, const Matrix& X) { return stack.encode(X); }

/// d(e(X)).
inline Matrix censor_original(const EncoderStack& stack, const DenseNetwork& decoder, const Matrix& X) {
  Matrix out = predict(decoder, stack.encode(X));
  if (out.cols() != X.cols())
    throw ShapeError("decoder output dim " + std::to_string(out.cols()) + " differs from data dim " +
                     std::to_string(X.cols()));
  return out;
}

// ------------------------------------------------------ architecture ----

struct Architecture {
  std::size_t latent_dim = 40;
  std::size_t encoder_hidden = 256;  // hidden width of the first encoder
  std::size_t stack_hidden = 0;      // hidden width of later encoders; 0 means latent_dim
  Activation hidden_activation = Activation::relu;
  Activation latent_activation = Activation::identity;
  std::vector<std::size_t> decoder_hidden{256};
  Activation decoder_output = Activation::sigmoid;
  std::vector<std::size_t> adversary_hidden{64};  // empty: logistic regression

  /// One hidden layer per encoder. The first maps the data to the latent
  /// space; later ones map latent to latent.
  std::vector<LayerSpec> encoder_specs(std::size_t input_dim, std::size_t stack_index) const {
    const std::size_t hidden =
        stack_index == 0 ? encoder_hidden : (stack_hidden == 0 ? latent_dim : stack_hidden);
    return {{input_dim, hidden, hidden_activation}, {hidden, latent_dim, latent_activation}};
  }

  std::vector<LayerSpec> decoder_specs(std::size_t data_dim) const {
    return mlp_specs(latent_dim, decoder_hidden, data_dim, hidden_activation, decoder_output);
  }

  std::vector<LayerSpec> adversary_specs() const {
    return mlp_specs(latent_dim, adversary_hidden, 1, hidden_activation, Activation::sigmoid);
  }

  void validate() const {
    if (latent_dim == 0 || encoder_hidden == 0) throw std::invalid_argument("architecture dims must be >= 1");
    for (auto h : decoder_hidden)
      if (h == 0) throw std::invalid_argument("decoder hidden widths must be >= 1");
    for (auto h : adversary_hidden)
      if (h == 0) throw std::invalid_argument("adversary hidden widths must be >= 1");
  }
};

/// How the reconstruction term enters the actor's objective. The reported
/// reconstruction MSE is always the per-row squared distance; `per_element`
/// additionally divides the actor's gradient by the data dimension so the
/// reconstruction and adversary terms have comparable magnitude.
enum class ReconstructionScale { per_row, per_element };

inline double reconstruction_gradient_scale(ReconstructionScale scale, std::size_t data_dim) {
  return scale == ReconstructionScale::per_element ? 1.0 / static_cast<double>(data_dim) : 1.0;
}

// ----------------------------------------------------------- reports ----

struct MetricsRecord {
  std::size_t epoch = 0;        // 0-based, monotone over the whole run
  std::size_t stack_index = 0;  // 0-based encoder index being trained
  double reconstruction_mse = 0.0;
  double adversary_cross_entropy = 0.0;
  double batch_mean_dampening = 0.0;
  double wall_time = 0.0;  // seconds since training start
};

enum class Termination { constraint_met, deadline, epoch_budget };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::constraint_met: return "constraint_met";
    case Termination::deadline: return "deadline";
    case Termination::epoch_budget: return "epoch_budget";
  }
  return "?";
}

struct TrainReport {
  std::vector<MetricsRecord> metrics;
  EncoderStack stack;
  DenseNetwork decoder;
  DenseNetwork adversary;  // empty for the plain autoencoder
  Termination terminated_by = Termination::epoch_budget;
  std::vector<double> stack_scores;  // adversary full-set accuracy after each stack (ALFR-DS)
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

// ----------------------------------------------------------- configs ----

struct AutoencoderConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  Architecture arch;
  ReconstructionScale reconstruction = ReconstructionScale::per_element;
  AdamHyper actor;
  std::uint64_t seed = 0;
};

enum class InterleaveSchedule { per_batch, per_epoch };

struct AlfrConfig {
  double alpha = 1.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  Architecture arch;
  ReconstructionScale reconstruction = ReconstructionScale::per_element;
  AdamHyper actor;
  AdamHyper adversary{3e-3};
  std::uint64_t seed = 0;
  InterleaveSchedule schedule = InterleaveSchedule::per_batch;

  void validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("alpha must be finite and >= 0");
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    arch.validate();
    actor.validate();
    adversary.validate();
  }
};

struct AlfrDsConfig {
  std::size_t max_stacks = 3;
  std::size_t epochs_per_stack = 10;
  std::size_t batch_size = 128;
  // Without a constraint every stack is trained and the run ends by
  // epoch_budget; stack scores are still recorded.
  std::optional<HypothesisConstraint> constraint = HypothesisConstraint{};
  Architecture arch;
  ReconstructionScale reconstruction = ReconstructionScale::per_element;
  std::size_t adversary_finetune_epochs = 2;
  bool reinit_adversary_per_stack = false;
  AdamHyper actor;
  AdamHyper adversary{3e-3};
  std::uint64_t seed = 0;
  std::optional<double> forced_dampening;  // replaces the measured batch dampening

  void validate() const {
    if (max_stacks == 0) throw std::invalid_argument("max_stacks must be >= 1");
    if (epochs_per_stack == 0) throw std::invalid_argument("epochs_per_stack must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (forced_dampening && !(*forced_dampening >= 0.0 && *forced_dampening <= 1.0))
      throw std::invalid_argument("forced_dampening must lie in [0,1]");
    if (constraint) constraint->validate();
    arch.validate();
    actor.validate();
    adversary.validate();
  }
};

namespace detail {

inline void check_training_data(const LabeledDataset& data) {
  if (data.rows() == 0) throw std::invalid_argument("training data is empty");
  data.validate();
}

inline void check_finite(double value, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(value))
    throw NumericError(std::string(what) + " became non-finite (" + std::to_string(value) + ") at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct EpochAccumulator {
  double mse_sum = 0.0;
  double ce_sum = 0.0;
  double dampening_sum = 0.0;
  std::size_t rows = 0;
  std::size_t batches = 0;

  void add(double mse, double ce, double dampening, std::size_t batch_rows) {
    mse_sum += mse * static_cast<double>(batch_rows);
    ce_sum += ce * static_cast<double>(batch_rows);
    dampening_sum += dampening;
    rows += batch_rows;
    batches += 1;
  }

  MetricsRecord record(std::size_t epoch, std::size_t stack_index, double wall) const {
    return MetricsRecord{epoch,
                         stack_index,
                         mse_sum / static_cast<double>(rows),
                         ce_sum / static_cast<double>(rows),
                         batches == 0 ? 0.0 : dampening_sum / static_cast<double>(batches),
                         wall};
  }
};

inline void emit(TrainReport& report, const MetricsRecord& rec, const EpochCallback& on_epoch) {
  report.metrics.push_back(rec);
  if (on_epoch) on_epoch(rec);
}

/// One Adam-driven pass of the adversary over (latent, S), encoder fixed.
inline void train_classifier_epoch(DenseNetwork& classifier, AdamState& state, const Matrix& inputs, const Labels& S,
                                   std::size_t batch_size, std::uint64_t epoch_seed) {
  for (const auto& rows : batch_indices(static_cast<std::size_t>(inputs.rows()), batch_size, epoch_seed)) {
    const Matrix xb = gather_rows(inputs, rows);
    const Labels sb = gather_labels(S, rows);
    const auto cache = forward(classifier, xb);
    const auto ce = cross_entropy(cache.output(), sb);
    if (!std::isfinite(ce.value)) throw NumericError("classifier cross-entropy became non-finite");
    adam_step(classifier, backward(classifier, cache, ce.gradient).gradients, state);
  }
}

}  // namespace detail

// ------------------------------------------------------- autoencoder ----

/// Plain autoencoder with a single encoder: minimizes reconstruction MSE only.
inline TrainReport train_autoencoder(const LabeledDataset& data, const AutoencoderConfig& config,
                                     const EpochCallback& on_epoch = {}) {
  detail::check_training_data(data);
  detail::Stopwatch clock;
  TrainReport report;
  report.stack = EncoderStack(data.dim());
  report.stack.push(init_network(config.arch.encoder_specs(data.dim(), 0), derive_seed(config.seed, SeedStream::encoder, 0)));
  report.decoder = init_network(config.arch.decoder_specs(data.dim()), derive_seed(config.seed, SeedStream::decoder));
  DenseNetwork& encoder = report.stack.top();
  auto enc_state = AdamState::for_network(encoder, config.actor);
  auto dec_state = AdamState::for_network(report.decoder, config.actor);
  const double recon_scale = reconstruction_gradient_scale(config.reconstruction, data.dim());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    detail::EpochAccumulator acc;
    const auto order = batch_indices(data.rows(), config.batch_size, derive_seed(config.seed, SeedStream::shuffle, epoch));
    for (std::size_t b = 0; b < order.size(); ++b) {
      const Matrix xb = gather_rows(data.X, order[b]);
      const auto enc_cache = forward(encoder, xb);
      const auto dec_cache = forward(report.decoder, enc_cache.output());
      const auto mse = mse_loss(dec_cache.output(), xb);
      detail::check_finite(mse.value, "reconstruction loss", epoch, b);
      const auto dec_bp = backward(report.decoder, dec_cache, recon_scale * mse.gradient);
      const auto enc_bp = backward(encoder, enc_cache, dec_bp.input_gradient);
      adam_step(encoder, enc_bp.gradients, enc_state);
      adam_step(report.decoder, dec_bp.gradients, dec_state);
      acc.add(mse.value, 0.0, 0.0, order[b].size());
    }
    detail::emit(report, acc.record(epoch, 0, clock.seconds()), on_epoch);
  }
  report.stack.freeze_top();
  report.terminated_by = Termination::epoch_budget;
  return report;
}

// -------------------------------------------------------------- ALFR ----

/// Joint loss mse + alpha * (negative cross-entropy), actor and adversary
/// updated in turns (adversary first).
inline TrainReport train_alfr(const LabeledDataset& data, const AlfrConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  detail::check_training_data(data);
  detail::Stopwatch clock;
  TrainReport report;
  report.stack = EncoderStack(data.dim());
  report.stack.push(init_network(config.arch.encoder_specs(data.dim(), 0), derive_seed(config.seed, SeedStream::encoder, 0)));
  report.decoder = init_network(config.arch.decoder_specs(data.dim()), derive_seed(config.seed, SeedStream::decoder));
  report.adversary = init_network(config.arch.adversary_specs(), derive_seed(config.seed, SeedStream::adversary, 0));
  DenseNetwork& encoder = report.stack.top();
  auto enc_state = AdamState::for_network(encoder, config.actor);
  auto dec_state = AdamState::for_network(report.decoder, config.actor);
  auto adv_state = AdamState::for_network(report.adversary, config.adversary);
  const double recon_scale = reconstruction_gradient_scale(config.reconstruction, data.dim());

  // Actor update given the current adversary; returns the reconstruction loss.
  auto actor_step = [&](const Matrix& xb, const Labels& sb, std::size_t epoch, std::size_t b) {
    const auto enc_cache = forward(encoder, xb);
    const auto dec_cache = forward(report.decoder, enc_cache.output());
    const auto mse = mse_loss(dec_cache.output(), xb);
    detail::check_finite(mse.value, "reconstruction loss", epoch, b);
    const auto dec_bp = backward(report.decoder, dec_cache, recon_scale * mse.gradient);
    Matrix latent_grad = dec_bp.input_gradient;
    if (config.alpha != 0.0) {
      const auto adv_cache = forward(report.adversary, enc_cache.output());
      const auto ce = cross_entropy(adv_cache.output(), sb);
      detail::check_finite(ce.value, "adversary cross-entropy", epoch, b);
      latent_grad -= config.alpha * backward(report.adversary, adv_cache, ce.gradient).input_gradient;
    }
    const auto enc_bp = backward(encoder, enc_cache, latent_grad);
    adam_step(encoder, enc_bp.gradients, enc_state);
    adam_step(report.decoder, dec_bp.gradients, dec_state);
    return mse.value;
  };

  struct AdversaryStepStats {
    double ce;
    double dampening;
  };
  auto adversary_step = [&](const Matrix& xb, const Labels& sb, std::size_t epoch, std::size_t b) {
    const Matrix latent = predict(encoder, xb);
    const auto adv_cache = forward(report.adversary, latent);
    const auto ce = cross_entropy(adv_cache.output(), sb);
    detail::check_finite(ce.value, "adversary cross-entropy", epoch, b);
    const double damp = dampening(accuracy(adv_cache.output(), sb), sb);
    adam_step(report.adversary, backward(report.adversary, adv_cache, ce.gradient).gradients, adv_state);
    return AdversaryStepStats{ce.value, damp};
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    detail::EpochAccumulator acc;
    const auto order = batch_indices(data.rows(), config.batch_size, derive_seed(config.seed, SeedStream::shuffle, epoch));
    if (config.schedule == InterleaveSchedule::per_batch) {
      for (std::size_t b = 0; b < order.size(); ++b) {
        const Matrix xb = gather_rows(data.X, order[b]);
        const Labels sb = gather_labels(data.S, order[b]);
        const auto adv = adversary_step(xb, sb, epoch, b);
        const double mse = actor_step(xb, sb, epoch, b);
        acc.add(mse, adv.ce, adv.dampening, order[b].size());
      }
    } else {
      std::vector<AdversaryStepStats> adv_stats;
      const auto adv_order =
          batch_indices(data.rows(), config.batch_size, derive_seed(config.seed, SeedStream::shuffle, epoch + (1ULL << 32)));
      for (std::size_t b = 0; b < adv_order.size(); ++b)
        adv_stats.push_back(adversary_step(gather_rows(data.X, adv_order[b]), gather_labels(data.S, adv_order[b]), epoch, b));
      for (std::size_t b = 0; b < order.size(); ++b) {
        const double mse = actor_step(gather_rows(data.X, order[b]), gather_labels(data.S, order[b]), epoch, b);
        const auto& adv = adv_stats[std::min(b, adv_stats.size() - 1)];
        acc.add(mse, adv.ce, adv.dampening, order[b].size());
      }
    }
    detail::emit(report, acc.record(epoch, 0, clock.seconds()), on_epoch);
  }
  report.stack.freeze_top();
  report.terminated_by = Termination::epoch_budget;
  return report;
}

// ----------------------------------------------------------- ALFR-DS ----

/// Gradients for one ALFR-DS mini-batch, all taken at the same pre-step
/// parameters.
struct DsGradients {
  GradientSet encoder;    // grad(mse) - dampening * grad(cross_entropy), through the top encoder
  GradientSet decoder;    // grad(mse), times the reconstruction scale
  GradientSet adversary;  // grad(cross_entropy), unscaled
  double reconstruction_mse = 0.0;
  double adversary_cross_entropy = 0.0;
  double adversary_accuracy = 0.0;
  double dampening = 0.0;
};

/// `encoder_input` is the frozen-prefix output for the batch, `target` the
/// raw rows the decoder reconstructs.
inline DsGradients ds_gradients(const DenseNetwork& encoder, const DenseNetwork& decoder, const DenseNetwork& adversary,
                                const Matrix& encoder_input, const Matrix& target, const Labels& S,
                                std::optional<double> forced_dampening = std::nullopt,
                                ReconstructionScale reconstruction = ReconstructionScale::per_element) {
  DsGradients g;
  const auto enc_cache = forward(encoder, encoder_input);
  const auto dec_cache = forward(decoder, enc_cache.output());
  const auto adv_cache = forward(adversary, enc_cache.output());
  const auto mse = mse_loss(dec_cache.output(), target);
  const auto ce = cross_entropy(adv_cache.output(), S);
  g.reconstruction_mse = mse.value;
  g.adversary_cross_entropy = ce.value;
  g.adversary_accuracy = accuracy(adv_cache.output(), S);
  g.dampening = forced_dampening ? *forced_dampening : dampening(g.adversary_accuracy, S).value();

  const double recon_scale = reconstruction_gradient_scale(reconstruction, static_cast<std::size_t>(target.cols()));
  auto dec_bp = backward(decoder, dec_cache, recon_scale * mse.gradient);
  auto adv_bp = backward(adversary, adv_cache, ce.gradient);
  Matrix latent_grad = std::move(dec_bp.input_gradient);
  if (g.dampening != 0.0) latent_grad -= g.dampening * adv_bp.input_gradient;
  g.encoder = backward(encoder, enc_cache, latent_grad).gradients;
  g.decoder = std::move(dec_bp.gradients);
  g.adversary = std::move(adv_bp.gradients);
  return g;
}

inline void ds_apply_actor(DenseNetwork& encoder, AdamState& enc_state, DenseNetwork& decoder, AdamState& dec_state,
                           const DsGradients& g) {
  adam_step(encoder, g.encoder, enc_state);
  adam_step(decoder, g.decoder, dec_state);
}

inline void ds_apply_adversary(DenseNetwork& adversary, AdamState& adv_state, const DsGradients& g) {
  scaled_adam_step(adversary, g.adversary, adv_state, 1.0 - g.dampening);
}

/// Stacked training with dampened concurrent updates. Decoder and adversary
/// persist across stacks; each stack adds a fresh encoder.
inline TrainReport train_alfr_ds(const LabeledDataset& data, const AlfrDsConfig& config,
                                 const EpochCallback& on_epoch = {}) {
  config.validate();
  detail::check_training_data(data);
  detail::Stopwatch clock;
  TrainReport report;
  report.stack = EncoderStack(data.dim());
  report.decoder = init_network(config.arch.decoder_specs(data.dim()), derive_seed(config.seed, SeedStream::decoder));
  report.adversary = init_network(config.arch.adversary_specs(), derive_seed(config.seed, SeedStream::adversary, 0));
  auto dec_state = AdamState::for_network(report.decoder, config.actor);
  auto adv_state = AdamState::for_network(report.adversary, config.adversary);
  report.terminated_by = config.constraint ? Termination::deadline : Termination::epoch_budget;

  std::size_t epoch = 0;
  for (std::size_t k = 0; k < config.max_stacks; ++k) {
    report.stack.push(init_network(config.arch.encoder_specs(report.stack.output_dim(), k),
                                   derive_seed(config.seed, SeedStream::encoder, k)));
    if (k > 0 && config.reinit_adversary_per_stack) {
      report.adversary = init_network(config.arch.adversary_specs(), derive_seed(config.seed, SeedStream::adversary, k));
      adv_state = AdamState::for_network(report.adversary, config.adversary);
    }
    DenseNetwork& encoder = report.stack.top();
    auto enc_state = AdamState::for_network(encoder, config.actor);
    const Matrix prefix = report.stack.encode_prefix(data.X);

    for (std::size_t e = 0; e < config.epochs_per_stack; ++e, ++epoch) {
      detail::EpochAccumulator acc;
      const auto order =
          batch_indices(data.rows(), config.batch_size, derive_seed(config.seed, SeedStream::shuffle, epoch));
      for (std::size_t b = 0; b < order.size(); ++b) {
        const Matrix xb = gather_rows(prefix, order[b]);
        const Matrix target = gather_rows(data.X, order[b]);
        const Labels sb = gather_labels(data.S, order[b]);
        const auto g = ds_gradients(encoder, report.decoder, report.adversary, xb, target, sb,
                                    config.forced_dampening, config.reconstruction);
        detail::check_finite(g.reconstruction_mse, "reconstruction loss", epoch, b);
        detail::check_finite(g.adversary_cross_entropy, "adversary cross-entropy", epoch, b);
        ds_apply_actor(encoder, enc_state, report.decoder, dec_state, g);
        ds_apply_adversary(report.adversary, adv_state, g);
        acc.add(g.reconstruction_mse, g.adversary_cross_entropy, g.dampening, order[b].size());
      }
      detail::emit(report, acc.record(epoch, k, clock.seconds()), on_epoch);
    }

    report.stack.freeze_top();
    const Matrix latent = report.stack.encode(data.X);
    for (std::size_t f = 0; f < config.adversary_finetune_epochs; ++f)
      detail::train_classifier_epoch(report.adversary, adv_state, latent, data.S, config.batch_size,
                                     derive_seed(config.seed, SeedStream::finetune, k * 100000 + f));
    const double score = accuracy(predict(report.adversary, latent), data.S);
    report.stack_scores.push_back(score);
    if (config.constraint && hypothesis_check(score, *config.constraint)) {
      report.terminated_by = Termination::constraint_met;
      break;
    }
  }
  return report;
}

}  // namespace alfr
