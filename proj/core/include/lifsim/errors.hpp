#pragma once

#include <stdexcept>
#include <string>

namespace lifsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario configuration. `path` names the offending field (e.g. "network.tau_c").
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// NaN/Inf state, tangential crossing, or another condition that invalidates a run.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised when a saltation quantity is requested at a non-transversal crossing.
class TangencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A located threshold crossing with crossing speed below the configured floor.
class DegenerateCrossingError : public NumericalError {
public:
    DegenerateCrossingError(double time, int neuron, double speed);
    double time() const noexcept { return time_; }
    int neuron() const noexcept { return neuron_; }
    double speed() const noexcept { return speed_; }

private:
    double time_;
    int neuron_;
    double speed_;
};

/// Not enough matched samples to form a strong-error statistic.
class InsufficientPoolError : public Error {
public:
    using Error::Error;
};

}  // namespace lifsim
