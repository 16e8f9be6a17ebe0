#pragma once

#include <stdexcept>
#include <string>

namespace geomvd {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncated payload, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

// Inputs that violate a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Tensor/matrix dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Filesystem read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Iterative solver failed to converge; carries the final relative residual.
class SolverError : public Error {
public:
    SolverError(const std::string& msg, double final_residual)
        : Error(msg), residual(final_residual) {}

    double residual;
};

} // namespace geomvd
