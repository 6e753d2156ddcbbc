#pragma once

#include <stdexcept>
#include <string>

namespace tensorank {

/// Failure categories. The CLI maps each one onto a distinct exit status.
enum class ErrorKind {
  usage,         // bad flags or arguments
  input,         // malformed or inconsistent input data
  cap_exceeded,  // storage or search cap hit
  numeric,       // overflow, zero-probability events, failed verification
  precondition,  // structural requirement of an operation not met
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::input: return "input";
    case ErrorKind::cap_exceeded: return "cap_exceeded";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::precondition: return "precondition";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace tensorank
