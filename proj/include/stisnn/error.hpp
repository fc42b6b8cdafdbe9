#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stisnn {

enum class ErrorKind {
  Shape,
  Config,
  CorruptStream,
  DegenerateInput,
  InvariantViolation,
  Infeasible,
  Format,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::CorruptStream: return "corrupt_stream";
    case ErrorKind::DegenerateInput: return "degenerate_input";
    case ErrorKind::InvariantViolation: return "invariant_violation";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace stisnn
