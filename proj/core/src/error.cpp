#include "trussgrasp/error.hpp"

namespace trussgrasp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Degenerate: return "degenerate-input";
    case ErrorKind::BehindCamera: return "behind-camera";
    case ErrorKind::Config: return "config";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::NoTarget: return "no-target";
    case ErrorKind::PreprocessingFailed: return "preprocessing-failed";
    case ErrorKind::Untrained: return "untrained";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace trussgrasp
