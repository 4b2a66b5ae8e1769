#pragma once

#include <stdexcept>
#include <string>

namespace dtl {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch or otherwise malformed arguments.
class UsageError : public Error {
  public:
    using Error::Error;
};

/// The behavior policy does not explore: some π_b(a|s) = 0, or the induced
/// state chain is reducible or periodic.
class AssumptionViolation : public Error {
  public:
    using Error::Error;
};

/// Gram matrix singular, feature matrix rank deficient.
class RankError : public Error {
  public:
    using Error::Error;
};

/// An iterative procedure hit its iteration cap before reaching tolerance.
class NonConvergence : public Error {
  public:
    using Error::Error;
};

/// A documented precondition of a bound formula does not hold.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

namespace detail {
inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw UsageError(message);
}
} // namespace detail

} // namespace dtl
