#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dae/model.hpp"
#include "dae/ode.hpp"

namespace dae::jumps {

using num::Index;
using num::Mat;
using num::Vec;

enum class Method { projector_chart, projector_fastflow, kernel_rule, nearest_point };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct JumpResult {
    Vec x_minus;
    Vec x_plus;
    Method method = Method::projector_chart;
    double constraint_residual = 0.0;  // |F2(x_plus)|
    /// Component of x_plus - x_minus orthogonal to ker E(x_plus); kernel rule only.
    std::optional<double> kernel_residual;
    /// Extrapolation error estimate; fast-flow projector only.
    std::optional<double> error_estimate;
    int iterations = 0;
    std::vector<std::string> diagnostics;
};

/// x+ = psi^-1(xi1(x-), 0).
JumpResult project_consistent_chart(const model::Scenario& s, const Vec& x_minus);

struct FastFlowOptions {
    std::vector<double> eps_schedule{1e-4, 1e-5};
    double layer_tol = 1e-8;
    double safety = 0.1;  // relative extension of the layer window
    num::IntegratorConfig integrator{};
};

/// Integrates the perturbed system across the boundary layer for each epsilon
/// and Richardson-extrapolates the two smallest endpoints to epsilon -> 0.
JumpResult project_consistent_fastflow(const model::Scenario& s, const Vec& x_minus,
                                       const FastFlowOptions& options = {});

struct KernelRuleOptions {
    double tol = 1e-12;
    int max_iter = 60;
    /// Optional multistart box; every distinct root found is reported.
    std::optional<std::pair<Vec, Vec>> multistart_box;
    int multistart_points = 16;
};

/// Defining equations of the kernel rule at x: (F2(x), W(x)^T (x - x-)),
/// W an orthonormal basis of the row space of E(x) aligned with that at x-.
Vec kernel_rule_residual(const model::Scenario& s, const Vec& x_minus, const Vec& x);

/// Solves F2(x+) = 0 and x+ - x- in ker E(x+) by Newton from x-. A
/// scenario reference point "kernel_rule_quoted" is checked against the
/// same equations and the outcome is added to the diagnostics.
JumpResult jump_kernel_rule(const model::Scenario& s, const Vec& x_minus,
                            const KernelRuleOptions& options = {});

/// Closest point of {F2 = 0} to x- (stand-in for a numerical-search
/// initializer); projected Gauss-Newton iteration.
JumpResult jump_nearest(const model::Scenario& s, const Vec& x_minus, double tol = 1e-13,
                        int max_iter = 100);

/// Dispatch by method; fast-flow uses `fastflow` options.
JumpResult run_method(const model::Scenario& s, Method method, const Vec& x_minus,
                      const FastFlowOptions& fastflow = {});

struct CoordinateFreenessReport {
    Method method = Method::projector_chart;
    Vec x_minus;
    Vec x_plus;              // jump computed in x coordinates
    Vec mapped;              // psi(x_plus)
    Vec xi_minus;            // psi(x_minus)
    Vec xi_plus;             // jump computed directly in normal-form coordinates
    double defect = 0.0;     // |mapped - xi_plus|
    bool commutes = false;   // defect <= tolerance
    double tolerance = 1e-6;
};

/// Compares the jump computed in x coordinates and mapped by psi with the
/// jump computed in the normal-form coordinates psi(x).
CoordinateFreenessReport coordinate_freeness_test(const model::Scenario& s, Method method,
                                                  const Vec& x_minus, double tolerance = 1e-6,
                                                  const FastFlowOptions& fastflow = {});

}  // namespace dae::jumps
