#pragma once

// Dense feed-forward networks with exact backpropagation. Batches are row
// major in the mathematical sense: one sample per row, one feature per column.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alfr/error.hpp"

namespace alfr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<std::uint8_t>;

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2, tanh = 3 };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline std::optional<Activation> parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  return std::nullopt;
}

struct LayerSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  Activation activation = Activation::identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix weights;  // output_dim x input_dim
  Vector bias;     // output_dim
};

inline void check_chain(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].input_dim == 0 || specs[i].output_dim == 0)
      throw ShapeError("layer " + std::to_string(i) + " has a zero dimension");
    if (static_cast<std::uint8_t>(specs[i].activation) > 3)
      throw ShapeError("layer " + std::to_string(i) + " has an unknown activation");
    if (i > 0 && specs[i].input_dim != specs[i - 1].output_dim)
      throw ShapeError("layer " + std::to_string(i) + " input dim " + std::to_string(specs[i].input_dim) +
                       " does not match previous output dim " + std::to_string(specs[i - 1].output_dim));
  }
}

class DenseNetwork {
 public:
  DenseNetwork() = default;

  explicit DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    std::vector<LayerSpec> specs;
    for (const auto& l : layers_) specs.push_back(l.spec);
    check_chain(specs);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (static_cast<std::size_t>(l.weights.rows()) != l.spec.output_dim ||
          static_cast<std::size_t>(l.weights.cols()) != l.spec.input_dim ||
          static_cast<std::size_t>(l.bias.size()) != l.spec.output_dim)
        throw ShapeError("layer " + std::to_string(i) + " parameter shapes do not match its spec");
    }
  }

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().spec.input_dim; }
  std::size_t output_dim() const { return layers_.back().spec.output_dim; }
  bool empty() const { return layers_.empty(); }

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Mutable access for optimizers and tests; refuses once frozen.
  DenseLayer& mutable_layer(std::size_t i) {
    if (frozen_) throw FreezeError("cannot mutate a frozen network");
    return layers_.at(i);
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  /// Bitwise parameter equality (frozen flag ignored).
  bool same_parameters(const DenseNetwork& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = other.layers_[i];
      if (!(a.spec == b.spec)) return false;
      if (std::memcmp(a.weights.data(), b.weights.data(), sizeof(double) * a.weights.size()) != 0) return false;
      if (std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * a.bias.size()) != 0) return false;
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
  bool frozen_ = false;
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
inline DenseNetwork init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  check_chain(specs);
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const auto& spec : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{spec, Matrix(spec.output_dim, spec.input_dim), Vector::Zero(spec.output_dim)};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    layers.push_back(std::move(layer));
  }
  return DenseNetwork(std::move(layers));
}

inline DenseNetwork init_network(std::initializer_list<LayerSpec> specs, std::uint64_t seed) {
  return init_network(std::span<const LayerSpec>(specs.begin(), specs.size()), seed);
}

/// Layer specs for an MLP input -> hidden... -> output.
inline std::vector<LayerSpec> mlp_specs(std::size_t input_dim, std::span<const std::size_t> hidden,
                                        std::size_t output_dim, Activation hidden_act, Activation output_act) {
  std::vector<LayerSpec> specs;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    specs.push_back({in, h, hidden_act});
    in = h;
  }
  specs.push_back({in, output_dim, output_act});
  return specs;
}

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return stable_sigmoid(v); }); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

// Derivative expressed through the activation output, which is all the cache keeps.
inline Matrix activation_derivative(Activation a, const Matrix& out) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(out.rows(), out.cols());
    case Activation::relu: return (out.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    case Activation::tanh: return (1.0 - out.array().square()).matrix();
  }
  return Matrix();
}

struct Batch {
  Matrix inputs;
  std::optional<Labels> labels;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

/// activations[0] is the input; activations[i + 1] is the output of layer i.
struct ForwardCache {
  std::vector<Matrix> activations;

  const Matrix& output() const { return activations.back(); }
};

inline ForwardCache forward(const DenseNetwork& net, const Matrix& inputs) {
  if (net.empty()) throw ShapeError("forward through an empty network");
  if (inputs.rows() == 0) throw ShapeError("forward on an empty batch");
  if (static_cast<std::size_t>(inputs.cols()) != net.input_dim())
    throw ShapeError("batch has " + std::to_string(inputs.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  ForwardCache cache;
  cache.activations.reserve(net.depth() + 1);
  cache.activations.push_back(inputs);
  for (const auto& layer : net.layers()) {
    Matrix z = cache.activations.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    apply_activation(layer.spec.activation, z);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

inline ForwardCache forward(const DenseNetwork& net, const Batch& batch) { return forward(net, batch.inputs); }

/// Output only, for callers that do not backpropagate.
inline Matrix predict(const DenseNetwork& net, const Matrix& inputs) { return forward(net, inputs).output(); }

struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientSet zeros_like(const DenseNetwork& net) {
    GradientSet g;
    for (const auto& l : net.layers()) {
      g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      g.biases.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  bool congruent_with(const DenseNetwork& net) const {
    if (weights.size() != net.depth() || biases.size() != net.depth()) return false;
    for (std::size_t i = 0; i < net.depth(); ++i) {
      const auto& l = net.layer(i);
      if (weights[i].rows() != l.weights.rows() || weights[i].cols() != l.weights.cols() ||
          biases[i].size() != l.bias.size())
        return false;
    }
    return true;
  }

  GradientSet& operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
  }
};

struct Backprop {
  GradientSet gradients;
  Matrix input_gradient;
};

/// Exact gradients of the scalar whose derivative w.r.t. the network output
/// is `output_gradient`.
inline Backprop backward(const DenseNetwork& net, const ForwardCache& cache, const Matrix& output_gradient) {
  if (cache.activations.size() != net.depth() + 1) throw ShapeError("forward cache does not match network depth");
  const Matrix& out = cache.output();
  if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols())
    throw ShapeError("output gradient shape does not match network output");

  Backprop result;
  result.gradients.weights.resize(net.depth());
  result.gradients.biases.resize(net.depth());
  Matrix upstream = output_gradient;
  for (std::size_t i = net.depth(); i-- > 0;) {
    const auto& layer = net.layer(i);
    const Matrix& a_out = cache.activations[i + 1];
    const Matrix& a_in = cache.activations[i];
    Matrix dz = layer.spec.activation == Activation::identity
                    ? upstream
                    : Matrix(upstream.cwiseProduct(activation_derivative(layer.spec.activation, a_out)));
    result.gradients.weights[i] = dz.transpose() * a_in;
    result.gradients.biases[i] = dz.colwise().sum().transpose();
    upstream = dz * layer.weights;
  }
  result.input_gradient = std::move(upstream);
  return result;
}

}  // namespace alfr
