#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdekf {

/// Machine-checkable cause attached to every numeric failure. Filter runs
/// record these instead of crashing; the benchmark harness reports them.
enum class FailureCause {
    NotPositiveDefinite,
    RankDeficient,
    SingularFactor,
    NonFinite,
    StepUnderflow,
};

const char* to_string(FailureCause cause);

/// Base class for recoverable numeric failures (failed factorizations,
/// degenerate solves, non-finite states). Callers higher up the stack decide
/// whether a failure is fatal or recorded data.
class NumericError : public std::runtime_error {
public:
    NumericError(FailureCause cause, const std::string& message)
        : std::runtime_error(message), cause_(cause) {}

    FailureCause cause() const noexcept { return cause_; }

private:
    FailureCause cause_;
};

/// A leading pivot of a Cholesky factorization was non-positive or
/// non-finite. Carries the zero-based pivot index.
class NotPositiveDefiniteError : public NumericError {
public:
    explicit NotPositiveDefiniteError(std::size_t pivot)
        : NumericError(FailureCause::NotPositiveDefinite,
                       "matrix not positive definite at pivot " + std::to_string(pivot)),
          pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// An orthogonal triangularization produced a factor whose diagonal
/// underflowed; the pre-array was (numerically) rank deficient.
class RankDeficientError : public NumericError {
public:
    explicit RankDeficientError(std::size_t diagonal)
        : NumericError(FailureCause::RankDeficient,
                       "rank-deficient pre-array: factor diagonal " +
                           std::to_string(diagonal) + " underflowed") {}
};

/// A triangular solve met a zero or non-finite diagonal.
class SingularFactorError : public NumericError {
public:
    explicit SingularFactorError(std::size_t diagonal)
        : NumericError(FailureCause::SingularFactor,
                       "singular triangular factor at diagonal " + std::to_string(diagonal)) {}
};

/// A state or derivative stopped being finite (overflow, NaN propagation).
class NonFiniteError : public NumericError {
public:
    explicit NonFiniteError(const std::string& what_failed)
        : NumericError(FailureCause::NonFinite, "non-finite values in " + what_failed) {}
};

}  // namespace cdekf
