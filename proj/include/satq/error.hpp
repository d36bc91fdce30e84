#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace satq {

enum class ErrorCode {
  singular_matrix,
  degenerate_update,
  invalid_parameter,
  dimension_mismatch,
  cap_too_small,
  no_kernel_vector,
  no_crossing,
  infeasible,
  iteration_limit,
  degenerate_tie_breaker,
  degenerate_activations,
  unknown_activation,
  too_large,
  bound_violated,
  insufficient_data,
  invalid_dims,
  parse_error,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::singular_matrix: return "SingularMatrix";
    case ErrorCode::degenerate_update: return "DegenerateUpdate";
    case ErrorCode::invalid_parameter: return "InvalidParameter";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::cap_too_small: return "CapTooSmall";
    case ErrorCode::no_kernel_vector: return "NoKernelVector";
    case ErrorCode::no_crossing: return "NoCrossing";
    case ErrorCode::infeasible: return "Infeasible";
    case ErrorCode::iteration_limit: return "IterationLimit";
    case ErrorCode::degenerate_tie_breaker: return "DegenerateTieBreaker";
    case ErrorCode::degenerate_activations: return "DegenerateActivations";
    case ErrorCode::unknown_activation: return "UnknownActivation";
    case ErrorCode::too_large: return "TooLarge";
    case ErrorCode::bound_violated: return "BoundViolated";
    case ErrorCode::insufficient_data: return "InsufficientData";
    case ErrorCode::invalid_dims: return "InvalidDims";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace satq
