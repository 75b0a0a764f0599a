#pragma once

#include <stdexcept>
#include <string>

namespace fbounds {

enum class ErrorKind {
  invalid_design,
  invalid_factor,
  invalid_input,
  parse_error,
  monotonicity_violation,
  assumption_violation,
  no_compliers,
  empty_group,
  invalid_share,
  precondition,
  generation_failure,
  insufficient_data,
  weak_first_stage,
  incompatible,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fbounds
