#include "hcd/error.hpp"

namespace hcd {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonFiniteState: return "NonFiniteState";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::NotOnGuard: return "NotOnGuard";
        case ErrorKind::ResetOutOfDomain: return "ResetOutOfDomain";
        case ErrorKind::GridTooFine: return "GridTooFine";
        case ErrorKind::TooManyComponents: return "TooManyComponents";
        case ErrorKind::TransientTooShort: return "TransientTooShort";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::DegreeOverflow: return "DegreeOverflow";
        case ErrorKind::BadParameter: return "BadParameter";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::InvalidState: return "InvalidState";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace hcd
