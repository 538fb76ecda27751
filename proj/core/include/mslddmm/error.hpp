#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mslddmm {

/// Machine-readable failure categories. Each maps onto one process exit code
/// of the command-line tool (see exit_code()).
enum class ErrorCode {
  kIndex,       // scale or landmark index out of range
  kShape,       // incompatible configuration/momentum/problem shapes
  kDegenerate,  // input that admits no answer (empty scale, ...)
  kContract,    // violated precondition of an operation
  kDivergence,  // non-finite state during time integration
  kParse,       // malformed input file
  kConfig,      // well-formed but invalid configuration values
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exit code used by the CLI for an uncaught error of the given category.
int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the integrators when a sample stops being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& message);

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mslddmm
