#ifndef INFOFLOW_ERROR_HPP
#define INFOFLOW_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace infoflow {

/// Base of every error thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run or experiment configuration (counts, step sizes, levels).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Malformed arguments: dimension mismatches, bad shapes, bad steps.
class InputError : public Error
{
public:
    using Error::Error;
};

/// Non-finite values produced by a score or objective.
class NumericError : public Error
{
public:
    using Error::Error;
};

/// Invalid decoder parameters.
class ModelError : public Error
{
public:
    using Error::Error;
};

/// Trajectory bookkeeping violations.
class RecordingError : public Error
{
public:
    using Error::Error;
};

/// Rejection sampler cannot make progress.
class SamplerError : public Error
{
public:
    using Error::Error;
};

/// File could not be read, parsed or written.
class IoError : public Error
{
public:
    using Error::Error;
};

/// A particle left the finite region during a flow.
class DivergenceError : public Error
{
public:
    DivergenceError(std::size_t step, const std::string &what)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace infoflow

#endif
