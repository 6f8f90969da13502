#pragma once

#include <stdexcept>
#include <string>

namespace dialbench {

/// Shape disagreement between tensors. Nothing is ever broadcast silently.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// NaN or Inf encountered where a finite value is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A tape was replayed after the parameters it recorded were mutated.
struct StaleTapeError : std::runtime_error {
  explicit StaleTapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Environment or agent driven outside its legal call sequence.
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dialbench
