#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dae {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or malformed input.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Inconsistent run or solver configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operation needs a chart or normal-form data the scenario does not carry.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// User-supplied data failed a structural check (e.g. a decoupling transform).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A precondition on the arguments (e.g. point on the manifold) does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A state lies outside the declared domain.
class DomainError : public Error {
public:
    DomainError(const std::string& what, Eigen::VectorXd point)
        : Error(what), point_(std::move(point)) {}
    const Eigen::VectorXd& point() const noexcept { return point_; }

private:
    Eigen::VectorXd point_;
};

/// A point in chart coordinates is not in the image of the chart.
class ChartRangeError : public Error {
public:
    ChartRangeError(const std::string& what, Eigen::VectorXd coords)
        : Error(what), coords_(std::move(coords)) {}
    const Eigen::VectorXd& coords() const noexcept { return coords_; }

private:
    Eigen::VectorXd coords_;
};

/// Linear system numerically singular; carries a condition estimate (inf if unknown).
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Iterative solver ran out of iterations or could not decrease the residual.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, Eigen::VectorXd last_iterate, double residual_norm,
                  int iterations)
        : Error(what),
          last_iterate_(std::move(last_iterate)),
          residual_norm_(residual_norm),
          iterations_(iterations) {}
    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    double residual_norm() const noexcept { return residual_norm_; }
    int iterations() const noexcept { return iterations_; }

private:
    Eigen::VectorXd last_iterate_;
    double residual_norm_;
    int iterations_;
};

/// A user callback failed (threw or returned non-finite values) at a probe point.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, Eigen::VectorXd probe)
        : Error(what), probe_(std::move(probe)) {}
    const Eigen::VectorXd& probe() const noexcept { return probe_; }

private:
    Eigen::VectorXd probe_;
};

/// Integrator failure at a definite time: step-size underflow or domain exit.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double time, Eigen::VectorXd last_state)
        : Error(what), time_(time), last_state_(std::move(last_state)) {}
    double time() const noexcept { return time_; }
    const Eigen::VectorXd& last_state() const noexcept { return last_state_; }

private:
    double time_;
    Eigen::VectorXd last_state_;
};

class StepUnderflow : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

class DomainExit : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

}  // namespace dae
