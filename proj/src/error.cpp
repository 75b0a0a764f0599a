#include "fbounds/error.hpp"

namespace fbounds {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_design: return "invalid-design";
    case ErrorKind::invalid_factor: return "invalid-factor";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::monotonicity_violation: return "monotonicity-violation";
    case ErrorKind::assumption_violation: return "assumption-violation";
    case ErrorKind::no_compliers: return "no-compliers";
    case ErrorKind::empty_group: return "empty-group";
    case ErrorKind::invalid_share: return "invalid-share";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::generation_failure: return "generation-failure";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::weak_first_stage: return "weak-first-stage";
    case ErrorKind::incompatible: return "incompatible";
  }
  return "unknown";
}

}  // namespace fbounds
