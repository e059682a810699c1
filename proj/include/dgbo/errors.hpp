#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dgbo {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (length mismatch, grid mismatch, bad sizes).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Parameter outside its admissible range (alpha not in [1,2], r out of range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The grid cannot resolve the requested object; usually fixed by a larger N or L.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Dense path requested beyond its size limit.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Iteration seed produced a sign-indefinite iterate.
class SeedError : public Error {
public:
    using Error::Error;
};

/// Modulation Newton failed; the field left the soliton tube.
class DecompositionError : public Error {
public:
    using Error::Error;
};

/// Field is too far from the soliton family to be decomposed.
class ClosenessError : public Error {
public:
    using Error::Error;
};

/// A monotonicity window is not covered by the modulation track.
class WindowError : public Error {
public:
    using Error::Error;
};

/// Spectral structure differs from the expected one (e.g. two negative eigenvalues).
class StructureError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace dgbo
