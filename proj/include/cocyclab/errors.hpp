#pragma once

#include <stdexcept>
#include <string>

namespace cocyclab {

/// Base class for the failures the experiment runner reports as numeric
/// breakdowns (exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A config or argument failed validation (exit code 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An orbit window does not cover the coordinates an evaluation needs.
class WindowTooSmall : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ReturnCapExceeded : public NumericError {
public:
    using NumericError::NumericError;
};

class EmptyIndicator : public NumericError {
public:
    using NumericError::NumericError;
};

class NumericalBreakdown : public NumericError {
public:
    using NumericError::NumericError;
};

/// Singular values of a long product are not separated enough to read off
/// a flag (degenerate or not yet resolved spectrum).
class InsufficientGap : public NumericError {
public:
    using NumericError::NumericError;
};

class DegenerateTuple : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NotTransverse : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace cocyclab
