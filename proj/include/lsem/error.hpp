#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace lsem {

enum class ErrorCode {
  InvalidArgument,
  InvalidSize,
  ShapeMismatch,
  CycleDetected,
  NotBowFree,
  NotAPath,
  NotUnitTriangular,
  EmptyBatch,
  AllZeroReference,
  BoundInapplicable,
  IoError,
  ParseError,
  // numerical failures below this line
  NearSingularSystem,
  NonPsdOmega,
  DegenerateDraw,
  BaselineRecoveryFailed,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::NotBowFree: return "NotBowFree";
    case ErrorCode::NotAPath: return "NotAPath";
    case ErrorCode::NotUnitTriangular: return "NotUnitTriangular";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::AllZeroReference: return "AllZeroReference";
    case ErrorCode::BoundInapplicable: return "BoundInapplicable";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NearSingularSystem: return "NearSingularSystem";
    case ErrorCode::NonPsdOmega: return "NonPsdOmega";
    case ErrorCode::DegenerateDraw: return "DegenerateDraw";
    case ErrorCode::BaselineRecoveryFailed: return "BaselineRecoveryFailed";
  }
  return "Unknown";
}

/// True for failures caused by the numbers rather than by the caller's input.
inline bool is_numerical(ErrorCode code) {
  return code >= ErrorCode::NearSingularSystem;
}

/// Single exception type for the library. `node()` is set for per-node
/// recovery failures (0-based vertex index).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<std::size_t> node = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), node_(node) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> node() const noexcept { return node_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> node_;
};

}  // namespace lsem
