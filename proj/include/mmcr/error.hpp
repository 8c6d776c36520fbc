#pragma once

#include <stdexcept>
#include <string>

namespace mmcr {

// Base for every failure raised by the library. `kind()` is the stable
// machine-readable tag the CLI puts in its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Iterative solver (SVD, eigensolver) did not converge.
class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& what) : Error("numerical_failure", what) {}
};

// Caller broke a documented precondition (shape mismatch, asymmetric input, ...).
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what) : Error("contract_violation", what) {}
};

// Input is valid in shape but numerically degenerate (zero vector, zero variance).
class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string& what) : Error("degenerate_input", what) {}
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error("convergence_error", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace mmcr
