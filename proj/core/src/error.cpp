#include "mslddmm/error.hpp"

namespace mslddmm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIndex: return "index_error";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kDegenerate: return "degenerate_input";
    case ErrorCode::kContract: return "contract_violation";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kConfig: return "config_error";
  }
  return "unknown_error";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShape:
    case ErrorCode::kIndex:
      return 2;
    case ErrorCode::kParse:
    case ErrorCode::kConfig:
    case ErrorCode::kDegenerate:
    case ErrorCode::kContract:
      return 3;
    case ErrorCode::kDivergence:
      return 5;
  }
  return 1;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

DivergenceError::DivergenceError(std::size_t step, const std::string& message)
    : Error(ErrorCode::kDivergence,
            message + " (step " + std::to_string(step) + ")"),
      step_(step) {}

}  // namespace mslddmm
