#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace snf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix dimensions between a model and its arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// The adaptive integrator could not complete (non-finite stage, step underflow,
/// step budget exhausted).
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double s, double h)
        : Error(what + " (s=" + std::to_string(s) + ", h=" + std::to_string(h) + ")"), s_(s), h_(h) {}

    double s() const { return s_; }
    double h() const { return h_; }

private:
    double s_;
    double h_;
};

/// Non-finite losses or gradients encountered during training or checking.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline void require_dim(long got, long expected, const std::string& what)
{
    if (got != expected) {
        throw DimensionError(what + ": expected dimension " + std::to_string(expected) + ", got " +
                             std::to_string(got));
    }
}

} // namespace snf
