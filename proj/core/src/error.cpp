#include "eotrack/error.hpp"

namespace eotrack {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kTooFewPoints: return "too-few-points";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kInsufficientInliers: return "insufficient-inliers";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

}  // namespace eotrack
