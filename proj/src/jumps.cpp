#include "dae/jumps.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dae/perturbation.hpp"

namespace dae::jumps {

std::string to_string(Method m) {
    switch (m) {
        case Method::projector_chart: return "projector_chart";
        case Method::projector_fastflow: return "projector_fastflow";
        case Method::kernel_rule: return "kernel_rule";
        case Method::nearest_point: return "nearest_point";
    }
    return "projector_chart";
}

Method method_from_string(const std::string& name) {
    for (Method m : {Method::projector_chart, Method::projector_fastflow, Method::kernel_rule,
                     Method::nearest_point})
        if (to_string(m) == name) return m;
    if (name == "projector") return Method::projector_chart;
    if (name == "fastflow") return Method::projector_fastflow;
    if (name == "kernel") return Method::kernel_rule;
    if (name == "nearest") return Method::nearest_point;
    throw ConfigError("unknown jump method '" + name + "'");
}

namespace {

std::string point_string(const Vec& x) {
    std::ostringstream os;
    os.precision(12);
    os << "(";
    for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

void require_in_domain(const model::Scenario& s, const Vec& x, const char* who) {
    if (x.size() != s.system.n)
        throw InvalidInput(std::string(who) + ": state has dimension " + std::to_string(x.size()) +
                           ", expected " + std::to_string(s.system.n));
    num::require_finite(x, who);
    if (!s.system.domain(x))
        throw DomainError(std::string(who) + ": x- = " + point_string(x) + " outside the domain (" +
                              s.system.domain.description + ")",
                          x);
}

// Orthonormal basis of the row space of E(x), i.e. the orthogonal complement
// of ker E(x).
Mat row_space_basis(const Mat& E, Index rank) {
    Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullV);
    return svd.matrixV().leftCols(rank);
}

}  // namespace

JumpResult project_consistent_chart(const model::Scenario& s, const Vec& x_minus) {
    const model::Chart& chart = s.require_chart();
    require_in_domain(s, x_minus, "projector");
    if (!chart.chart_domain(x_minus))
        throw DomainError("projector: x- = " + point_string(x_minus) + " outside the chart domain (" +
                              chart.chart_domain.description + ")",
                          x_minus);
    Vec xi = chart.psi(x_minus);
    xi.tail(s.system.n - chart.r).setZero();
    JumpResult out;
    out.method = Method::projector_chart;
    out.x_minus = x_minus;
    out.x_plus = chart.psi_inv(xi);
    if (!chart.chart_domain(out.x_plus))
        throw ChartRangeError("projector: psi^-1 left the chart domain", xi);
    out.constraint_residual = model::constraint_map(s.system, out.x_plus).norm();
    return out;
}

JumpResult project_consistent_fastflow(const model::Scenario& s, const Vec& x_minus,
                                       const FastFlowOptions& options) {
    const model::Chart& chart = s.require_chart();
    s.require_inwf();
    require_in_domain(s, x_minus, "fast-flow projector");
    if (!chart.chart_domain(x_minus))
        throw DomainError("fast-flow projector: x- outside the chart domain", x_minus);
    if (options.eps_schedule.size() < 2)
        throw ConfigError("fast-flow projector: at least two epsilon values required");
    if (!(options.layer_tol > 0.0) || !(options.safety >= 0.0))
        throw ConfigError("fast-flow projector: layer_tol must be positive and safety non-negative");

    std::vector<double> eps = options.eps_schedule;
    for (double e : eps)
        if (!(e > 0.0)) throw ConfigError("fast-flow projector: epsilon values must be positive");
    std::sort(eps.begin(), eps.end(), std::greater<>());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
    if (eps.size() < 2) throw ConfigError("fast-flow projector: at least two distinct epsilon values required");

    const double xi2_norm = chart.psi(x_minus).tail(s.system.n - chart.r).norm();
    const auto shared = std::make_shared<const model::Scenario>(s);

    JumpResult out;
    out.method = Method::projector_fastflow;
    out.x_minus = x_minus;
    std::vector<Vec> ends;
    for (double e : eps) {
        const double window =
            xi2_norm > options.layer_tol ? (1.0 + options.safety) * e * std::log(xi2_norm / options.layer_tol) : 0.0;
        if (window == 0.0) {
            ends.push_back(x_minus);
            continue;
        }
        num::IntegratorConfig cfg = options.integrator;
        cfg.mode = num::IntegratorMode::implicit_stiff;
        const perturb::PerturbedField field(shared, e);
        const auto traj = perturb::integrate_perturbed(field, x_minus, {0.0, window}, cfg, {window});
        ends.push_back(traj.states.back());
        out.iterations += traj.accepted_steps;
        std::ostringstream d;
        d << "eps = " << e << ": layer window " << window << ", endpoint " << point_string(ends.back());
        out.diagnostics.push_back(d.str());
    }
    const std::size_t m = ends.size();
    const double e1 = eps[m - 2], e2 = eps[m - 1];
    out.x_plus = (e1 * ends[m - 1] - e2 * ends[m - 2]) / (e1 - e2);
    out.error_estimate = (out.x_plus - ends[m - 1]).norm();
    out.constraint_residual = model::constraint_map(s.system, out.x_plus).norm();
    return out;
}

namespace {

struct KernelSystem {
    const model::Scenario& s;
    Vec x_minus;
    Index r;
    Mat V_ref;

    KernelSystem(const model::Scenario& scenario, const Vec& xm)
        : s(scenario), x_minus(xm), r(model::compress(scenario.system, xm).rank),
          V_ref(row_space_basis(scenario.system.E(xm), r)) {}

    Mat basis_at(const Vec& x) const {
        const Mat E = s.system.E(x);
        if (num::numeric_rank(E).rank != r) throw DomainError("kernel rule: rank of E changes", x);
        return num::align_basis(row_space_basis(E, r), V_ref);
    }

    Vec residual(const Vec& x) const {
        if (!s.system.domain(x)) throw DomainError("kernel rule: iterate left the domain", x);
        const Index n = s.system.n;
        Vec out(n);
        out.head(n - r) = model::constraint_map(s.system, x);
        out.tail(r) = basis_at(x).transpose() * (x - x_minus);
        return out;
    }
};

}  // namespace

Vec kernel_rule_residual(const model::Scenario& s, const Vec& x_minus, const Vec& x) {
    require_in_domain(s, x_minus, "kernel rule");
    return KernelSystem(s, x_minus).residual(x);
}

JumpResult jump_kernel_rule(const model::Scenario& s, const Vec& x_minus, const KernelRuleOptions& options) {
    require_in_domain(s, x_minus, "kernel rule");
    const Index n = s.system.n;
    const KernelSystem ks(s, x_minus);
    auto residual = [&ks](const Vec& x) { return ks.residual(x); };
    auto jacobian = [&](const Vec& x) { return num::fd_jacobian(residual, x, num::fd_step(x)); };

    num::NewtonOptions nopt;
    nopt.tol = options.tol;
    nopt.max_iter = options.max_iter;
    const num::NewtonResult sol = num::newton_solve(residual, jacobian, x_minus, nopt);

    JumpResult out;
    out.method = Method::kernel_rule;
    out.x_minus = x_minus;
    out.x_plus = sol.x;
    out.iterations = sol.iterations;
    out.constraint_residual = model::constraint_map(s.system, sol.x).norm();
    out.kernel_residual = (ks.basis_at(sol.x).transpose() * (sol.x - x_minus)).norm();

    if (auto it = s.reference_points.find("kernel_rule_quoted"); it != s.reference_points.end()) {
        std::ostringstream d;
        d.precision(6);
        try {
            const double defect = ks.residual(it->second).norm();
            if (defect > 1e-6)
                d << "quoted kernel-rule value " << point_string(it->second)
                  << " does not satisfy the defining equations (residual " << defect << "); the root from x- is "
                  << point_string(sol.x);
            else
                d << "quoted kernel-rule value " << point_string(it->second) << " satisfies the defining equations";
        } catch (const Error& e) {
            d << "quoted kernel-rule value " << point_string(it->second) << " could not be checked: " << e.what();
        }
        out.diagnostics.push_back(d.str());
    }

    if (options.multistart_box) {
        const auto& [lo, hi] = *options.multistart_box;
        if (lo.size() != n || hi.size() != n) throw ConfigError("kernel rule: multistart box has wrong dimension");
        std::mt19937_64 rng(0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<Vec> roots{sol.x};
        for (int k = 0; k < options.multistart_points; ++k) {
            Vec start(n);
            for (Index i = 0; i < n; ++i) start[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
            try {
                const Vec root = num::newton_solve(residual, jacobian, start, nopt).x;
                const bool known = std::any_of(roots.begin(), roots.end(),
                                               [&](const Vec& q) { return (q - root).norm() <= 1e-6 * (1.0 + q.norm()); });
                if (!known) roots.push_back(root);
            } catch (const Error&) {
            }
        }
        if (roots.size() > 1) {
            std::ostringstream d;
            d << "kernel rule has " << roots.size() << " roots in the box:";
            for (const Vec& q : roots) d << " " << point_string(q);
            d << "; reported the one reached from x-";
            out.diagnostics.push_back(d.str());
        }
    }
    return out;
}

JumpResult jump_nearest(const model::Scenario& s, const Vec& x_minus, double tol, int max_iter) {
    require_in_domain(s, x_minus, "nearest point");
    const model::DaeSystem& sys = s.system;
    Vec x = x_minus;
    JumpResult out;
    out.method = Method::nearest_point;
    out.x_minus = x_minus;
    out.diagnostics.push_back("minimal-norm correction onto F2 = 0; stand-in for a numerical initializer");
    for (int it = 1; it <= max_iter; ++it) {
        if (!sys.domain(x)) throw DomainError("nearest point: iterate left the domain", x);
        const Vec f2 = model::constraint_map(sys, x);
        const Mat J = model::constraint_jacobian(sys, x);
        const Vec back = x_minus - x;
        // Minimizes |x + d - x-| subject to the linearized constraint.
        const Vec d = back - J.completeOrthogonalDecomposition().solve(Vec(f2 + J * back));
        x += d;
        out.iterations = it;
        if (d.norm() <= tol * (1.0 + x.norm())) {
            out.x_plus = x;
            out.constraint_residual = model::constraint_map(sys, x).norm();
            return out;
        }
    }
    throw NoConvergence("nearest point: no convergence", x, model::constraint_map(sys, x).norm(), max_iter);
}

JumpResult run_method(const model::Scenario& s, Method method, const Vec& x_minus,
                      const FastFlowOptions& fastflow) {
    switch (method) {
        case Method::projector_chart: return project_consistent_chart(s, x_minus);
        case Method::projector_fastflow: return project_consistent_fastflow(s, x_minus, fastflow);
        case Method::kernel_rule: return jump_kernel_rule(s, x_minus);
        case Method::nearest_point: return jump_nearest(s, x_minus);
    }
    throw ConfigError("unknown jump method");
}

CoordinateFreenessReport coordinate_freeness_test(const model::Scenario& s, Method method,
                                                  const Vec& x_minus, double tolerance,
                                                  const FastFlowOptions& fastflow) {
    const model::Chart& chart = s.require_chart();
    const model::Scenario normal = model::scenario_inwf(s);

    CoordinateFreenessReport out;
    out.method = method;
    out.tolerance = tolerance;
    out.x_minus = x_minus;
    out.x_plus = run_method(s, method, x_minus, fastflow).x_plus;
    out.mapped = chart.psi(out.x_plus);
    out.xi_minus = chart.psi(x_minus);
    out.xi_plus = run_method(normal, method, out.xi_minus, fastflow).x_plus;
    out.defect = (out.mapped - out.xi_plus).norm();
    out.commutes = out.defect <= tolerance;
    return out;
}

}  // namespace dae::jumps
