#pragma once

#include <stdexcept>
#include <string>

namespace evoheat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested time lies outside [0, T) of the model.
class TimeOutOfRange : public Error {
public:
    using Error::Error;
};

/// Chart coordinates are not finite or fall inside the pole-exclusion zone.
class ChartError : public Error {
public:
    using Error::Error;
};

class StepTooLarge : public Error {
public:
    using Error::Error;
};

/// A hypothesis of a check (finite kappa, zero varrho, ...) does not hold for the model.
class HypothesisViolation : public Error {
public:
    using Error::Error;
};

/// The 1-D reference solver cannot represent the requested data.
class OracleUnavailable : public Error {
public:
    using Error::Error;
};

class SingularMetric : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace evoheat
