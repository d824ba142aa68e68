#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dae/model.hpp"
#include "dae/ode.hpp"

namespace dae::perturb {

using num::Index;
using num::Mat;
using num::Vec;

/// x' = E_eps(x)^-1 F(x) with
///   E_eps(x) = E(x) + Q(x)^-1 diag(0_r, -eps I) Dpsi(x).
/// In normal-form coordinates this is xi1' = F*(xi1), xi2' = -xi2 / eps.
class PerturbedField {
public:
    PerturbedField(std::shared_ptr<const model::Scenario> scenario, double epsilon);

    double epsilon() const noexcept { return epsilon_; }
    const model::Scenario& scenario() const noexcept { return *scenario_; }

    /// E_eps at x (no domain check).
    Mat matrix(const Vec& x) const;

    /// Solves E_eps v = F(x). Throws DomainError outside the chart domain and
    /// SingularSystem (with condition estimate) when E_eps is numerically singular.
    Vec operator()(const Vec& x) const;

    /// 1-norm condition estimate of E_eps at x.
    double condition_estimate(const Vec& x) const;

private:
    std::shared_ptr<const model::Scenario> scenario_;
    double epsilon_;
};

/// Requires chart and normal-form data; epsilon > 0.
PerturbedField build_perturbed_field(const model::Scenario& s, double epsilon);

/// Integrates the perturbed field, declaring epsilon as the stiffness parameter.
num::Trajectory integrate_perturbed(const PerturbedField& field, const Vec& x0, num::TimeSpan span,
                                    const num::IntegratorConfig& config,
                                    const std::vector<double>& output_times = {});

/// The C1 solution from a consistent point: integrates xi1' = F*(xi1) with
/// xi2 = 0 and maps back through psi^-1. Throws PreconditionError when x0_plus
/// is not on the manifold within `manifold_tol`.
num::Trajectory integrate_reduced(const model::Scenario& s, const Vec& x0_plus, num::TimeSpan span,
                                  const num::IntegratorConfig& config,
                                  const std::vector<double>& output_times = {},
                                  double manifold_tol = 1e-8);

struct ConvergenceEntry {
    double epsilon = 0.0;
    bool valid = false;
    std::string error;
    double sup_error = 0.0;    // max over [t1, T] of |x_eps(t) - x(t)|
    double layer_error = 0.0;  // max over [0, T] of |xi2(x_eps(t)) - exp(-t/eps) xi2(x-)|
    std::vector<double> times;
    std::vector<Vec> perturbed;  // x_eps(t)
    std::vector<Vec> reduced;    // x(t)
    std::vector<double> state_error;
    std::vector<double> layer_deviation;
};

struct ConvergenceReport {
    std::string scenario;
    Vec x_minus, x_plus;
    double t1 = 0.0, T = 0.0;
    std::vector<double> eps_list;
    std::vector<double> sup_errors;
    std::vector<double> layer_errors;
    std::vector<ConvergenceEntry> entries;
    double integration_tol = 0.0;
    double bound = 0.0;       // threshold on the smallest-epsilon sup error
    bool decreasing = false;
    bool layer_pass = false;  // every layer error <= 10 * integration_tol
    bool pass = false;        // decreasing and smallest sup error <= bound
};

struct ConvergenceOptions {
    int uniform_points = 201;
    int layer_points = 100;  // extra output times eps * k / 10, k = 1..layer_points
    /// Explicit/implicit switch in auto mode; default 1e-2 * (T - t1).
    std::optional<double> stiffness_threshold;
};

/// For each epsilon, integrates the perturbed system from x- and the reduced
/// system from the projected point, and measures the sup error on [t1, T]
/// and the deviation of xi2 from the exact layer exp(-t/eps) xi2(x-).
ConvergenceReport convergence_study(const model::Scenario& s, const Vec& x_minus,
                                    const std::vector<double>& eps_list, double t1, double T,
                                    const num::IntegratorConfig& config,
                                    const ConvergenceOptions& options = {});

}  // namespace dae::perturb
