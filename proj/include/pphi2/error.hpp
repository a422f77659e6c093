#pragma once

#include <stdexcept>
#include <string>

namespace pphi2 {

/// Base class of every exception thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad parameters, malformed configuration, mismatched bases.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (eigensolver, quadrature, positivity, overflow).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The operator m^2 - Delta + 4v (+ J) is not strictly positive.
class NotPositiveError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

} // namespace detail
} // namespace pphi2
