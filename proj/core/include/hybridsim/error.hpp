#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridsim {

enum class ErrorCode {
  InvalidArgument,
  InsufficientData,
  GridMismatch,
  Coverage,
  SingularMatrix,
  FloatingZeroSequence,
  DivisionByZero,
  InvalidCut,
  Divergence,
  PowerFlowInfeasible,
  InconsistentIndices,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-readable code; the CLI
// turns it into a JSON error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hybridsim
