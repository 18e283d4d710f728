#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::GridMismatch: return "grid_mismatch";
    case ErrorCode::Coverage: return "coverage";
    case ErrorCode::SingularMatrix: return "singular_matrix";
    case ErrorCode::FloatingZeroSequence: return "floating_zero_sequence";
    case ErrorCode::DivisionByZero: return "division_by_zero";
    case ErrorCode::InvalidCut: return "invalid_cut";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::PowerFlowInfeasible: return "power_flow_infeasible";
    case ErrorCode::InconsistentIndices: return "inconsistent_indices";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace hybridsim
