#pragma once

#include <stdexcept>
#include <string>

namespace mrf {

enum class ErrorCode {
  invalid_argument,
  unsupported_structure,
  cycle_detected,
  disconnected,
  numerical_error,
  capacity_error,
  parse_error,
  schema_mismatch,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers (and the CLI
/// exit-code mapping) which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mrf
