#pragma once

#include <stdexcept>
#include <string>

namespace fastcq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (branch cut, t <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A resolvent or block matrix could not be inverted.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Result not representable in double precision.
class OverflowError : public Error {
public:
    using Error::Error;
};

/// Quadrature plan could not meet the tolerance within the node cap.
class InfeasiblePlanError : public Error {
public:
    using Error::Error;
};

/// Numerically certified method constant violated on the sample grid.
class CertificationError : public Error {
public:
    using Error::Error;
};

/// Sizes of inputs do not agree.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Nonlinear fixed point stopped contracting; carries the offending step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace fastcq
