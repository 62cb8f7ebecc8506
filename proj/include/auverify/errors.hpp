#pragma once

#include <stdexcept>
#include <string>

namespace auverify {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Layer or run parameters that cannot describe a valid computation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input documents (model files, manifests, box configs).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Model file whose contents violate a structural invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, long layer_index = -1)
      : Error(layer_index >= 0
                  ? "layer " + std::to_string(layer_index) + ": " + what
                  : what),
        layer_index_(layer_index) {}

  long layer_index() const noexcept { return layer_index_; }

 private:
  long layer_index_;
};

class UnknownAuError : public Error {
 public:
  explicit UnknownAuError(const std::string& au)
      : Error("unknown action unit '" + au + "'"), au_(au) {}
  const std::string& au() const noexcept { return au_; }

 private:
  std::string au_;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace auverify
