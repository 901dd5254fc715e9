#pragma once

#include <stdexcept>
#include <string>

namespace rarefx {

/// Base of every error raised by the library. `is_validation()` separates
/// bad user input (CLI exit code 2) from failures during computation (exit 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual bool is_validation() const noexcept { return false; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    bool is_validation() const noexcept override { return true; }
};

/// An index, window or time range falls outside the data it addresses.
class BoundsError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Input files that cannot be parsed or pivoted (parse, gap, range errors).
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A numerical quantity is undefined for the given data (0/0 ratios,
/// nonstationary fits, non-finite training loss, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

inline void require_bounds(bool ok, const std::string& what) {
    if (!ok) throw BoundsError(what);
}

}  // namespace detail
}  // namespace rarefx
