#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alfr/error.hpp"
#include "alfr/nn.hpp"

namespace alfr {

struct LabeledDataset {
  Matrix X;  // n x dim
  Labels S;  // n, each 0 or 1
  std::string name;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }

  /// Throws std::invalid_argument if the dataset invariants do not hold.
  void validate() const {
    if (static_cast<std::size_t>(X.rows()) != S.size())
      throw std::invalid_argument(name + ": " + std::to_string(X.rows()) + " rows but " + std::to_string(S.size()) +
                                  " labels");
    for (std::size_t i = 0; i < S.size(); ++i)
      if (S[i] > 1) throw std::invalid_argument(name + ": label at row " + std::to_string(i) + " is not binary");
    if (!X.allFinite()) throw std::invalid_argument(name + ": non-finite feature value");
  }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.name = name;
    out.X.resize(static_cast<Eigen::Index>(indices.size()), X.cols());
    out.S.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(indices[i]));
      out.S[i] = S[indices[i]];
    }
    return out;
  }
};

// ---------------------------------------------------------------- IDX ----

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row major per image
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

namespace detail {

inline std::vector<std::uint8_t> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), "cannot open");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) | (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) | static_cast<std::uint32_t>(bytes[offset + 3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

inline IdxImages parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& path) {
  if (bytes.size() < 16) throw LoadError(path, "truncated IDX image header");
  const auto magic = detail::read_be32(bytes, 0);
  if (magic != kIdxImagesMagic)
    throw LoadError(path, "bad IDX image magic " + std::to_string(magic) + " (expected 2051)");
  IdxImages img;
  img.count = detail::read_be32(bytes, 4);
  img.rows = detail::read_be32(bytes, 8);
  img.cols = detail::read_be32(bytes, 12);
  if (img.rows == 0 || img.cols == 0) throw LoadError(path, "zero image dimension in IDX header");
  // rows * cols fits in 64 bits; the product with count may not.
  const std::uint64_t per_image = static_cast<std::uint64_t>(img.rows) * img.cols;
  const std::uint64_t available = bytes.size() - 16;
  if (img.count > available / per_image) throw LoadError(path, "truncated IDX image body");
  if (available > img.count * per_image) throw LoadError(path, "trailing bytes after IDX image body");
  img.pixels.assign(bytes.begin() + 16, bytes.end());
  return img;
}

inline IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& path) {
  if (bytes.size() < 8) throw LoadError(path, "truncated IDX label header");
  const auto magic = detail::read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic)
    throw LoadError(path, "bad IDX label magic " + std::to_string(magic) + " (expected 2049)");
  const auto count = detail::read_be32(bytes, 4);
  if (bytes.size() - 8 < count) throw LoadError(path, "truncated IDX label body");
  if (bytes.size() - 8 > count) throw LoadError(path, "trailing bytes after IDX label body");
  IdxLabels out;
  out.labels.assign(bytes.begin() + 8, bytes.end());
  return out;
}

inline IdxImages read_idx_images(const std::filesystem::path& path) {
  return parse_idx_images(detail::read_all_bytes(path), path.string());
}

inline IdxLabels read_idx_labels(const std::filesystem::path& path) {
  return parse_idx_labels(detail::read_all_bytes(path), path.string());
}

inline void write_idx_images(std::ostream& out, const IdxImages& img) {
  detail::write_be32(out, kIdxImagesMagic);
  detail::write_be32(out, img.count);
  detail::write_be32(out, img.rows);
  detail::write_be32(out, img.cols);
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline void write_idx_labels(std::ostream& out, const IdxLabels& lab) {
  detail::write_be32(out, kIdxLabelsMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(lab.labels.size()));
  out.write(reinterpret_cast<const char*>(lab.labels.data()), static_cast<std::streamsize>(lab.labels.size()));
}

/// Pixels scaled by 1/255; S = 1 iff the digit label equals `protected_digit`.
inline LabeledDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                                     int protected_digit) {
  if (protected_digit < 0 || protected_digit > 9)
    throw std::invalid_argument("protected_digit must be in 0..9, got " + std::to_string(protected_digit));
  const auto img = read_idx_images(images_path);
  const auto lab = read_idx_labels(labels_path);
  if (lab.labels.size() != img.count)
    throw LoadError(labels_path.string(), "holds " + std::to_string(lab.labels.size()) + " labels but " +
                                              images_path.string() + " holds " + std::to_string(img.count) +
                                              " images");
  const std::size_t dim = static_cast<std::size_t>(img.rows) * img.cols;
  LabeledDataset ds;
  ds.name = images_path.filename().string();
  ds.X.resize(img.count, static_cast<Eigen::Index>(dim));
  ds.S.resize(img.count);
  for (std::size_t i = 0; i < img.count; ++i) {
    if (lab.labels[i] > 9)
      throw LoadError(labels_path.string(), "label " + std::to_string(lab.labels[i]) + " at index " +
                                                std::to_string(i) + " is not a digit");
    ds.S[i] = lab.labels[i] == protected_digit ? 1 : 0;
    const std::uint8_t* px = img.pixels.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j)
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(px[j]) / 255.0;
  }
  return ds;
}

// ------------------------------------------------------ embedding tables ----

enum class TableFormat { csv_with_label_column, raw_f32le_with_sidecar_labels };

/// Sidecar for the raw format: first line is the row width, then one 0/1
/// label per line.
inline std::filesystem::path sidecar_path(const std::filesystem::path& table) {
  auto p = table;
  p += ".labels";
  return p;
}

inline TableFormat infer_table_format(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TableFormat::csv_with_label_column : TableFormat::raw_f32le_with_sidecar_labels;
}

namespace detail {

inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::uint8_t parse_label(std::string_view cell, const std::string& path, std::size_t row) {
  double v = 0.0;
  if (!parse_double(cell, v) || (v != 0.0 && v != 1.0))
    throw LoadError(path, "row " + std::to_string(row) + ": label '" + std::string(cell) + "' is not 0 or 1");
  return static_cast<std::uint8_t>(v);
}

inline LabeledDataset load_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open");
  std::vector<std::vector<double>> rows;
  Labels labels;
  std::string line;
  std::size_t width = 0;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    double probe = 0.0;
    if (line_no == 1 && !parse_double(cells[0], probe)) continue;  // header
    if (cells.size() < 2) throw LoadError(path.string(), "row " + std::to_string(row) + ": no feature columns");
    if (width == 0) width = cells.size() - 1;
    if (cells.size() - 1 != width)
      throw LoadError(path.string(), "row " + std::to_string(row) + ": ragged row with " +
                                         std::to_string(cells.size() - 1) + " features, expected " +
                                         std::to_string(width));
    labels.push_back(parse_label(cells[0], path.string(), row));
    std::vector<double> values(width);
    for (std::size_t j = 0; j < width; ++j)
      if (!parse_double(cells[j + 1], values[j]) || !std::isfinite(values[j]))
        throw LoadError(path.string(), "row " + std::to_string(row) + ": bad number in column " +
                                           std::to_string(j + 1));
    rows.push_back(std::move(values));
    ++row;
  }
  if (rows.empty()) throw LoadError(path.string(), "table has no rows");
  LabeledDataset ds;
  ds.name = path.filename().string();
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  ds.S = std::move(labels);
  return ds;
}

inline LabeledDataset load_raw_table(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  std::ifstream meta(side);
  if (!meta) throw LoadError(side.string(), "cannot open label sidecar");
  std::string line;
  double width_value = 0.0;
  if (!std::getline(meta, line) || !parse_double(line, width_value) || width_value < 1 ||
      width_value != std::floor(width_value))
    throw LoadError(side.string(), "first line must be the row width");
  const auto width = static_cast<std::size_t>(width_value);
  Labels labels;
  std::size_t row = 0;
  while (std::getline(meta, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    labels.push_back(parse_label(line, side.string(), row++));
  }
  if (labels.empty()) throw LoadError(side.string(), "no labels");
  const auto bytes = read_all_bytes(path);
  if (bytes.size() % (4 * width) != 0)
    throw LoadError(path.string(), "row " + std::to_string(bytes.size() / (4 * width)) +
                                       ": file size is not a multiple of the sidecar width " + std::to_string(width));
  const std::size_t n = bytes.size() / (4 * width);
  if (n != labels.size())
    throw LoadError(path.string(), "row " + std::to_string(std::min(n, labels.size())) + ": " + std::to_string(n) +
                                       " rows of width " + std::to_string(width) + " but sidecar has " +
                                       std::to_string(labels.size()) + " labels");
  LabeledDataset ds;
  ds.name = path.filename().string();
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t o = 4 * (i * width + j);
      const std::uint32_t bits = static_cast<std::uint32_t>(bytes[o]) | (static_cast<std::uint32_t>(bytes[o + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[o + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[o + 3]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw LoadError(path.string(), "row " + std::to_string(i) + ": non-finite value");
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(v);
    }
  ds.S = std::move(labels);
  return ds;
}

}  // namespace detail

inline LabeledDataset load_embedding_table(const std::filesystem::path& path, TableFormat format) {
  return format == TableFormat::csv_with_label_column ? detail::load_csv_table(path) : detail::load_raw_table(path);
}

/// Writes a table loadable by load_embedding_table. CSV values are printed
/// with round-trip precision; the raw format narrows to f32.
inline void save_embedding_table(const std::filesystem::path& path, const LabeledDataset& data, TableFormat format) {
  if (format == TableFormat::csv_with_label_column) {
    std::ofstream out(path);
    if (!out) throw LoadError(path.string(), "cannot open for writing");
    char buf[64];
    for (std::size_t i = 0; i < data.rows(); ++i) {
      out << static_cast<int>(data.S[i]);
      for (std::size_t j = 0; j < data.dim(); ++j) {
        const auto [ptr, ec] =
            std::to_chars(buf, buf + sizeof(buf), data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      }
      out << '\n';
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(path.string(), "cannot open for writing");
  for (std::size_t i = 0; i < data.rows(); ++i)
    for (std::size_t j = 0; j < data.dim(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(
          static_cast<float>(data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      const char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                         static_cast<char>(bits >> 24)};
      out.write(b, 4);
    }
  std::ofstream meta(sidecar_path(path));
  meta << data.dim() << '\n';
  for (auto s : data.S) meta << static_cast<int>(s) << '\n';
}

// ---------------------------------------------------------- synthetic ----

enum class SyntheticKind { leaky_feature, noise_bit, xor_protected };

/// leaky_feature: column 0 equals S, other columns N(0,1).
/// noise_bit: all columns N(0,1), S an independent fair coin.
/// xor_protected: all columns N(0,1), S = (x0 > 0) xor (x1 > 0).
inline LabeledDataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (n < 2 || dim < 2) throw std::invalid_argument("make_synthetic needs n >= 2 and dim >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  LabeledDataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  ds.S.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < dim; ++j) ds.X(r, static_cast<Eigen::Index>(j)) = normal(rng);
    switch (kind) {
      case SyntheticKind::leaky_feature:
        ds.S[i] = coin(rng) ? 1 : 0;
        ds.X(r, 0) = ds.S[i];
        break;
      case SyntheticKind::noise_bit:
        ds.S[i] = coin(rng) ? 1 : 0;
        break;
      case SyntheticKind::xor_protected:
        ds.S[i] = ((ds.X(r, 0) > 0.0) != (ds.X(r, 1) > 0.0)) ? 1 : 0;
        break;
    }
  }
  ds.name = kind == SyntheticKind::leaky_feature ? "leaky_feature"
            : kind == SyntheticKind::noise_bit   ? "noise_bit"
                                                 : "xor_protected";
  return ds;
}

// ------------------------------------------------------ split / batch ----

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

/// Seeded shuffled partition into (train, eval).
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, const SplitSpec& spec) {
  if (data.rows() < 2) throw std::invalid_argument("split needs at least two rows");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie in (0,1)");
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(data.rows())));
  if (n_train == 0 || n_train == data.rows())
    throw std::invalid_argument("train_fraction " + std::to_string(spec.train_fraction) + " leaves an empty side for " +
                                std::to_string(data.rows()) + " rows");
  const auto idx = shuffled_indices(data.rows(), spec.seed);
  auto train = data.subset(std::span(idx).first(n_train));
  auto eval = data.subset(std::span(idx).subspan(n_train));
  train.name = data.name + "/train";
  eval.name = data.name + "/eval";
  return {std::move(train), std::move(eval)};
}

/// Row indices for one epoch: every row exactly once, seed-shuffled, final
/// batch possibly short.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                           std::uint64_t epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  const auto idx = shuffled_indices(n, epoch_seed);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

inline Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline Labels gather_labels(const Labels& S, std::span<const std::size_t> rows) {
  Labels out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = S[rows[i]];
  return out;
}

inline std::vector<Batch> batches(const LabeledDataset& data, std::size_t batch_size, std::uint64_t epoch_seed) {
  std::vector<Batch> out;
  for (const auto& rows : batch_indices(data.rows(), batch_size, epoch_seed))
    out.push_back(Batch{gather_rows(data.X, rows), gather_labels(data.S, rows)});
  return out;
}

}  // namespace alfr
