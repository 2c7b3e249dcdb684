#pragma once

#include <stdexcept>
#include <string>

namespace mojet {

// Base for every error raised by the library. The CLI maps the derived
// categories onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input shapes, out-of-range parameters, malformed configs.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Non-finite values, divergence, factorization breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

// Cholesky / LU breakdown on a matrix that is not (numerically) invertible.
class SingularSystemError : public NumericError {
public:
    using NumericError::NumericError;
};

// Probe design cannot support an unregularized jet fit.
class RankDeficiencyError : public NumericError {
public:
    using NumericError::NumericError;
};

// Jets disagree across base points, so the tapped map is not linear.
class NotLinearError : public NumericError {
public:
    using NumericError::NumericError;
};

// Hypotheses of the linear identifiability result are violated.
class UnidentifiableError : public NumericError {
public:
    using NumericError::NumericError;
};

// Missing or malformed data files.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace mojet
