#pragma once

#include <stdexcept>
#include <string>

namespace eotrack {

enum class ErrorKind {
  kIo,
  kFormat,
  kUnsupported,
  kInvalidArgument,
  kTooFewPoints,
  kDegenerate,
  kInsufficientInliers,
  kNumerical,
  kConfig,
};

const char* to_string(ErrorKind kind) noexcept;

/// Exception type thrown by every eotrack module. The kind lets callers (the
/// CLI in particular) map failures onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace eotrack
