#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (unsupported geometry, bad ladder, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. eps <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

class InfeasibleSetError : public Error {
public:
    using Error::Error;
};

/// Raised by the SPD routines; carries the offending eigenvalue when known.
class SpectralError : public Error {
public:
    SpectralError(const std::string& what, double eigenvalue)
        : Error(what), eigenvalue_(eigenvalue) {}
    explicit SpectralError(const std::string& what) : Error(what) {}

    [[nodiscard]] double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_ = 0.0;
};

/// Failure of an inner solve during a time step.
class StepError : public Error {
public:
    StepError(const std::string& what, std::size_t step, double residual)
        : Error(what + " (step " + std::to_string(step) + ", residual " +
                std::to_string(residual) + ")"),
          step_(step), residual_(residual) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    std::size_t step_;
    double residual_;
};

/// Blow-up guard tripped: some |x| exceeded the divergence threshold.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class CertificateError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

}  // namespace omv
