#pragma once

// CNSR network container:
//   "CNSR" | u32 version | u32 layer_count |
//   per layer: u32 input_dim | u32 output_dim | u8 activation |
//              f64 weights[output_dim * input_dim] (row major) | f64 bias[output_dim]
// All integers and floats little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "alfr/nn.hpp"

namespace alfr {

inline constexpr std::array<char, 4> kNetworkMagic{'C', 'N', 'S', 'R'};
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated network stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated network stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_network(std::ostream& out, const DenseNetwork& net) {
  out.write(kNetworkMagic.data(), kNetworkMagic.size());
  detail::put_u32(out, kNetworkFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(net.depth()));
  for (const auto& layer : net.layers()) {
    detail::put_u32(out, static_cast<std::uint32_t>(layer.spec.input_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(layer.spec.output_dim));
    out.put(static_cast<char>(layer.spec.activation));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) detail::put_f64(out, layer.weights(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) detail::put_f64(out, layer.bias(r));
  }
}

/// Reads one network; throws std::runtime_error on a malformed stream.
inline DenseNetwork read_network(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kNetworkMagic)
    throw std::runtime_error("not a CNSR network stream");
  const auto version = detail::get_u32(in);
  if (version != kNetworkFormatVersion)
    throw std::runtime_error("unsupported CNSR version " + std::to_string(version));
  const auto count = detail::get_u32(in);
  if (count == 0 || count > 4096) throw std::runtime_error("implausible layer count " + std::to_string(count));
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec spec;
    spec.input_dim = detail::get_u32(in);
    spec.output_dim = detail::get_u32(in);
    const int tag = in.get();
    if (tag < 0 || tag > 3) throw std::runtime_error("bad activation tag in layer " + std::to_string(i));
    spec.activation = static_cast<Activation>(tag);
    if (spec.input_dim == 0 || spec.output_dim == 0 || spec.input_dim * spec.output_dim > (1ULL << 31))
      throw std::runtime_error("bad dimensions in layer " + std::to_string(i));
    DenseLayer layer{spec, Matrix(spec.output_dim, spec.input_dim), Vector(spec.output_dim)};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = detail::get_f64(in);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = detail::get_f64(in);
    layers.push_back(std::move(layer));
  }
  try {
    return DenseNetwork(std::move(layers));
  } catch (const ShapeError& e) {
    throw std::runtime_error(std::string("inconsistent network: ") + e.what());
  }
}

inline void save_network(const std::filesystem::path& path, const DenseNetwork& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(path.string(), "cannot open for writing");
  write_network(out, net);
  if (!out) throw LoadError(path.string(), "write failed");
}

inline DenseNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), "cannot open");
  try {
    return read_network(in);
  } catch (const std::runtime_error& e) {
    throw LoadError(path.string(), e.what());
  }
}

}  // namespace alfr
