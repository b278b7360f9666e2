#pragma once

#include <stdexcept>
#include <string>

namespace lpft {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument values (counts, scales, ranks).
class ParameterError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data. The message names the offending row or key.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold for the input.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss/gradient or loss above the divergence threshold.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class UnsupportedArchitectureError : public Error {
public:
    using Error::Error;
};

/// Config schema violation; exit code 2 in the CLI.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace lpft
