#pragma once

#include <stdexcept>
#include <string>

namespace hcd {

enum class ErrorKind {
    NonFiniteState,
    StepUnderflow,
    NotOnGuard,
    ResetOutOfDomain,
    GridTooFine,
    TooManyComponents,
    TransientTooShort,
    BudgetExceeded,
    DegreeOverflow,
    BadParameter,
    ParseError,
    InvalidState,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hcd
