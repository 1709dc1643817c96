#pragma once

#include <stdexcept>
#include <string>

namespace alfr {

/// Dimension or shape disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Attempt to mutate a frozen network.
class FreezeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or unreadable input file. `path()` names the offending file.
class LoadError : public std::runtime_error {
 public:
  LoadError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Invalid experiment configuration. `field()` is "section.key" where known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A loss became NaN or infinite during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alfr
