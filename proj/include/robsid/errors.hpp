#pragma once

#include <stdexcept>
#include <string>

namespace robsid {

/// Base class for all library errors. The CLI maps the concrete type to an
/// exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed, inconsistent or too-short input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical precondition failed (rank deficiency, indefiniteness,
/// non-convergence). `value()` carries the diagnostic quantity, e.g. the
/// condition number or the last residual.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double value = 0.0)
        : Error(what), value_(value) {}
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// The requested combination of options is not implemented (e.g. the
/// Gibbs sampler on MIMO data).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace robsid
