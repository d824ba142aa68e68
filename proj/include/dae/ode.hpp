#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dae/numkit.hpp"

namespace dae::num {

enum class IntegratorMode { explicit_adaptive, implicit_stiff, auto_select };

std::string to_string(IntegratorMode mode);
IntegratorMode integrator_mode_from_string(const std::string& name);

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 0.05;
    IntegratorMode mode = IntegratorMode::auto_select;
    // auto mode goes implicit when the caller declares a stiffness parameter below this
    double stiffness_threshold = 1e-2;
    int max_steps = 2'000'000;

    void validate() const;
};

/// Scale of the error the integrator is asked to keep (state magnitudes ~1).
inline double integration_tolerance(const IntegratorConfig& c) { return c.abs_tol + c.rel_tol; }

struct TimeSpan {
    double t0 = 0.0;
    double t1 = 1.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    IntegratorMode mode_used = IntegratorMode::explicit_adaptive;
    long accepted_steps = 0;
    long rejected_steps = 0;
    long field_evaluations = 0;

    std::size_t size() const { return times.size(); }
    Index dimension() const { return states.empty() ? 0 : states.front().size(); }
};

struct OdeOptions {
    /// Sorted times inside the span at which to report the state; empty means
    /// every accepted step.
    std::vector<double> output_times;
    /// Stiffness parameter declared by the caller (e.g. a perturbation epsilon).
    std::optional<double> declared_epsilon;
    /// States outside this set abort integration with DomainExit, which carries
    /// the last accepted time and state.
    std::function<bool(const Vec&)> domain;
    /// Analytic Jacobian of the field; finite differences otherwise.
    MatrixFunction jacobian;
};

/// Integrates x' = field(x) over `span`.
///
/// Explicit mode is Dormand-Prince 5(4) with its quartic dense output.
/// Implicit mode is the 3-stage Radau IIA collocation method (order 5,
/// L-stable) with Newton stage solves; local error is estimated by step
/// doubling and output times are hit exactly. Auto mode picks implicit iff
/// `declared_epsilon < config.stiffness_threshold`.
Trajectory integrate_ode(const VectorFunction& field, const Vec& x0, TimeSpan span,
                         const IntegratorConfig& config, const OdeOptions& options = {});

}  // namespace dae::num
