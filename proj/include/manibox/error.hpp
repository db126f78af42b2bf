#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace manibox {

enum class ErrorKind {
  NonFinite,
  MaskedBBox,
  DegenerateConfiguration,
  BehindCamera,
  ShapeMismatch,
  EmptyDataset,
  DomainError,
  SingularNormalMatrix,
  Unreachable,
  TeacherFailure,
  InvalidArgument,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// All library failures surface as this exception; `kind()` identifies the
/// failure class so callers (and the CLI reports) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::MaskedBBox: return "MaskedBBox";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::TeacherFailure: return "TeacherFailure";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace manibox
