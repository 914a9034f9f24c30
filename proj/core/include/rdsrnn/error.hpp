#pragma once

#include <stdexcept>
#include <string>

namespace rdsrnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model or system description (bad probabilities, shapes, ...).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Bad call-site data: wrong dimensions, empty batches, misaligned inputs.
class InputError : public Error {
public:
    using Error::Error;
};

/// Non-finite parameters, inputs or intermediate values.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Exhaustive enumeration would exceed the configured cap.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Coupled trajectories have already merged; ratio is undefined.
class CouplingCollapsedError : public Error {
public:
    using Error::Error;
};

/// Regression input contains non-positive values.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Operation not defined for the network's feedback topology.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Linear-Gaussian model is not usable (e.g. innovation covariance not PD).
class ModelError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration did not converge within the iteration cap.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Training loss blew up.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// File could not be written or read.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace rdsrnn
