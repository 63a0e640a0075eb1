#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srcid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A coefficient evaluated outside its admissible range at a quadrature point.
class InvalidCoefficient : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// An iterative linear solve did not reach its tolerance.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double residual, std::size_t iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

/// The elliptic operator is not positive definite (A >= delta I fails for every delta > 0).
class DegenerateOperator : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace srcid
