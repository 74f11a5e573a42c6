#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blm {

enum class ErrorKind {
  BadSpec,
  NonFinite,
  ParseError,
  ShapeError,
  SizeMismatch,
  PlanMismatch,
  EmptyCalibrationSet,
  BadParams,
  Busy,
  BindError,
  ModelLoadError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::PlanMismatch: return "PlanMismatch";
    case ErrorKind::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::Busy: return "Busy";
    case ErrorKind::BindError: return "BindError";
    case ErrorKind::ModelLoadError: return "ModelLoadError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported through this one exception type; callers
// that need to branch on the cause inspect kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace blm
