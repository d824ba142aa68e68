#include "dae/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dae/analysis.hpp"
#include "dae/jumps.hpp"

namespace dae::perturb {

PerturbedField::PerturbedField(std::shared_ptr<const model::Scenario> scenario, double epsilon)
    : scenario_(std::move(scenario)), epsilon_(epsilon) {
    if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_))
        throw ConfigError("perturbed field: epsilon must be positive and finite");
    scenario_->require_chart();
    scenario_->require_inwf();
}

Mat PerturbedField::matrix(const Vec& x) const {
    const model::Chart& chart = *scenario_->chart;
    const Index n = scenario_->system.n;
    const Index r = chart.r;
    const Mat q = scenario_->inwf->Q_equiv(x);
    Mat scaled_dpsi = chart.dpsi(x);
    scaled_dpsi.topRows(r).setZero();
    scaled_dpsi.bottomRows(n - r) *= -epsilon_;
    return scenario_->system.E(x) + q.partialPivLu().solve(scaled_dpsi);
}

double PerturbedField::condition_estimate(const Vec& x) const {
    Eigen::PartialPivLU<Mat> lu(matrix(x));
    const double rc = lu.rcond();
    return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
}

Vec PerturbedField::operator()(const Vec& x) const {
    const model::Chart& chart = *scenario_->chart;
    if (!chart.chart_domain(x)) {
        std::ostringstream msg;
        msg << "perturbed field: [" << x.transpose() << "] outside the chart domain ("
            << chart.chart_domain.description << ")";
        throw DomainError(msg.str(), x);
    }
    Eigen::PartialPivLU<Mat> lu(matrix(x));
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) {
        std::ostringstream msg;
        msg << "perturbed field: E_eps numerically singular at [" << x.transpose() << "]";
        throw SingularSystem(msg.str(), rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity());
    }
    return lu.solve(scenario_->system.F(x));
}

PerturbedField build_perturbed_field(const model::Scenario& s, double epsilon) {
    return PerturbedField(std::make_shared<const model::Scenario>(s), epsilon);
}

num::Trajectory integrate_perturbed(const PerturbedField& field, const Vec& x0, num::TimeSpan span,
                                    const num::IntegratorConfig& config,
                                    const std::vector<double>& output_times) {
    num::OdeOptions opt;
    opt.output_times = output_times;
    opt.declared_epsilon = field.epsilon();
    opt.domain = field.scenario().chart->chart_domain.contains;
    return num::integrate_ode([&field](const Vec& x) { return field(x); }, x0, span, config, opt);
}

num::Trajectory integrate_reduced(const model::Scenario& s, const Vec& x0_plus, num::TimeSpan span,
                                  const num::IntegratorConfig& config,
                                  const std::vector<double>& output_times, double manifold_tol) {
    const model::Chart& chart = s.require_chart();
    const model::InwfData& inwf = s.require_inwf();
    if (!analysis::on_manifold(s, x0_plus, manifold_tol)) {
        std::ostringstream msg;
        msg << "integrate_reduced: [" << x0_plus.transpose() << "] is not on the consistency manifold";
        throw PreconditionError(msg.str());
    }
    const Index n = s.system.n;
    const Index r = chart.r;
    auto lift = [&](const Vec& xi1) {
        Vec xi = Vec::Zero(n);
        xi.head(r) = xi1;
        return chart.psi_inv(xi);
    };

    num::OdeOptions opt;
    opt.output_times = output_times;
    opt.domain = [&](const Vec& xi1) {
        try {
            return chart.chart_domain(lift(xi1));
        } catch (const Error&) {
            return false;
        }
    };
    const Vec xi10 = chart.psi(x0_plus).head(r);
    num::Trajectory traj = num::integrate_ode(inwf.Fstar, xi10, span, config, opt);
    for (Vec& state : traj.states) state = lift(state);
    return traj;
}

namespace {

std::vector<double> output_grid(double eps, double T, const ConvergenceOptions& o) {
    std::vector<double> t;
    const int m = std::max(o.uniform_points, 2);
    for (int i = 0; i < m; ++i) t.push_back(T * static_cast<double>(i) / (m - 1));
    for (int k = 1; k <= o.layer_points; ++k) {
        const double tk = eps * k / 10.0;
        if (tk < T) t.push_back(tk);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace

ConvergenceReport convergence_study(const model::Scenario& s, const Vec& x_minus,
                                    const std::vector<double>& eps_list, double t1, double T,
                                    const num::IntegratorConfig& config,
                                    const ConvergenceOptions& options) {
    if (eps_list.size() < 3) throw ConfigError("convergence_study: at least three epsilon values required");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ConfigError("convergence_study: epsilon values must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw ConfigError("convergence_study: epsilon list must be strictly decreasing");
    }
    if (!(t1 > 0.0 && t1 < T)) throw ConfigError("convergence_study: need 0 < t1 < T");
    config.validate();

    const model::Chart& chart = s.require_chart();
    const Index n = s.system.n;
    const Index r = chart.r;

    ConvergenceReport report;
    report.scenario = s.name;
    report.x_minus = x_minus;
    report.t1 = t1;
    report.T = T;
    report.eps_list = eps_list;
    report.integration_tol = num::integration_tolerance(config);
    report.x_plus = jumps::project_consistent_chart(s, x_minus).x_plus;
    const Vec xi20 = chart.psi(x_minus).tail(n - r);

    num::IntegratorConfig cfg = config;
    cfg.stiffness_threshold = options.stiffness_threshold.value_or(1e-2 * (T - t1));
    const auto shared = std::make_shared<const model::Scenario>(s);

    bool all_valid = true;
    for (double eps : eps_list) {
        ConvergenceEntry entry;
        entry.epsilon = eps;
        try {
            const auto grid = output_grid(eps, T, options);
            const PerturbedField field(shared, eps);
            const auto pert = integrate_perturbed(field, x_minus, {0.0, T}, cfg, grid);
            const auto red = integrate_reduced(s, report.x_plus, {0.0, T}, cfg, grid);
            entry.times = pert.times;
            entry.perturbed = pert.states;
            entry.reduced = red.states;
            for (std::size_t i = 0; i < pert.times.size(); ++i) {
                const double t = pert.times[i];
                const double err = (pert.states[i] - red.states[i]).norm();
                const Vec xi2 = chart.psi(pert.states[i]).tail(n - r);
                const double dev = (xi2 - std::exp(-t / eps) * xi20).norm();
                entry.state_error.push_back(err);
                entry.layer_deviation.push_back(dev);
                if (t >= t1) entry.sup_error = std::max(entry.sup_error, err);
                entry.layer_error = std::max(entry.layer_error, dev);
            }
            entry.valid = true;
        } catch (const Error& e) {
            entry.error = e.what();
            all_valid = false;
        }
        report.sup_errors.push_back(entry.valid ? entry.sup_error : std::numeric_limits<double>::quiet_NaN());
        report.layer_errors.push_back(entry.valid ? entry.layer_error : std::numeric_limits<double>::quiet_NaN());
        report.entries.push_back(std::move(entry));
    }

    report.decreasing = all_valid;
    for (std::size_t i = 1; all_valid && i < report.sup_errors.size(); ++i)
        if (!(report.sup_errors[i] < report.sup_errors[i - 1])) report.decreasing = false;
    report.layer_pass = all_valid;
    for (double le : report.layer_errors)
        if (!(le <= 10.0 * report.integration_tol)) report.layer_pass = false;
    const double eps_min = eps_list.back();
    report.bound = std::max(10.0 * report.integration_tol, std::exp(-t1 / eps_min) * xi20.norm() * 10.0);
    report.pass = report.decreasing && report.sup_errors.back() <= report.bound;
    return report;
}

}  // namespace dae::perturb
