#include "dae/ode.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace dae::num {

std::string to_string(IntegratorMode mode) {
    switch (mode) {
        case IntegratorMode::explicit_adaptive: return "explicit_adaptive";
        case IntegratorMode::implicit_stiff: return "implicit_stiff";
        case IntegratorMode::auto_select: return "auto";
    }
    return "auto";
}

IntegratorMode integrator_mode_from_string(const std::string& name) {
    if (name == "explicit_adaptive" || name == "explicit") return IntegratorMode::explicit_adaptive;
    if (name == "implicit_stiff" || name == "implicit") return IntegratorMode::implicit_stiff;
    if (name == "auto") return IntegratorMode::auto_select;
    throw ConfigError("unknown integrator mode '" + name + "'");
}

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("integrator tolerances must be > 0");
    if (!(max_step > 0.0)) throw ConfigError("integrator max_step must be > 0");
    if (!(stiffness_threshold >= 0.0)) throw ConfigError("stiffness_threshold must be >= 0");
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// Radau IIA, 3 stages.
const double kSqrt6 = std::sqrt(6.0);
const std::array<std::array<double, 3>, 3> kRadauA{{
    {(88.0 - 7.0 * kSqrt6) / 360.0, (296.0 - 169.0 * kSqrt6) / 1800.0, (-2.0 + 3.0 * kSqrt6) / 225.0},
    {(296.0 + 169.0 * kSqrt6) / 1800.0, (88.0 + 7.0 * kSqrt6) / 360.0, (-2.0 - 3.0 * kSqrt6) / 225.0},
    {(16.0 - kSqrt6) / 36.0, (16.0 + kSqrt6) / 36.0, 1.0 / 9.0},
}};

class Field {
public:
    Field(const VectorFunction& f, Trajectory& traj) : f_(f), traj_(traj) {}
    Vec operator()(const Vec& x) const {
        ++traj_.field_evaluations;
        Vec v = f_(x);
        if (!v.allFinite()) throw EvaluationError("integrate_ode: non-finite field value", x);
        return v;
    }

private:
    const VectorFunction& f_;
    Trajectory& traj_;
};

double wrms(const Vec& e, const Vec& y0, const Vec& y1, const IntegratorConfig& c) {
    if (e.size() == 0) return 0.0;
    double acc = 0.0;
    for (Index i = 0; i < e.size(); ++i) {
        const double sc = c.abs_tol + c.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        acc += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(e.size()));
}

double initial_step(const Vec& y, const Vec& f0, double span, const IntegratorConfig& c,
                    double order) {
    const double d0 = wrms(y, y, y, c);
    const double d1 = wrms(f0, y, y, c);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    if (d1 > 0.0) h = std::min(h, std::pow(0.01 / d1, 1.0 / order) * 0.1);
    return std::min({h, c.max_step, span});
}

// Collects output samples; output times are validated up front.
class Recorder {
public:
    Recorder(Trajectory& traj, const std::vector<double>& times) : traj_(traj), times_(times) {}

    bool every_step() const { return times_.empty(); }
    bool done() const { return next_ >= times_.size(); }
    double next_time() const { return times_[next_]; }

    void record(double t, const Vec& x) {
        traj_.times.push_back(t);
        traj_.states.push_back(x);
    }
    // Records all pending output times <= t using `value(time)`.
    template <typename Interp>
    void record_until(double t, Interp&& value) {
        while (!done() && times_[next_] <= t) {
            record(times_[next_], value(times_[next_]));
            ++next_;
        }
    }

private:
    Trajectory& traj_;
    const std::vector<double>& times_;
    std::size_t next_ = 0;
};

void validate_outputs(const std::vector<double>& times, TimeSpan span) {
    const double slack = 1e-12 * std::max(1.0, std::abs(span.t1));
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || times[i] < span.t0 - slack || times[i] > span.t1 + slack)
            throw ConfigError("integrate_ode: output time outside the integration span");
        if (i > 0 && times[i] < times[i - 1])
            throw ConfigError("integrate_ode: output times must be sorted");
    }
}

[[noreturn]] void fail_small_step(double t, const Vec& y, bool domain_failure,
                                  const std::string& last_error) {
    std::ostringstream msg;
    msg << "integrate_ode: step size underflow at t = " << t;
    if (!last_error.empty()) msg << " (" << last_error << ")";
    if (domain_failure) throw DomainExit(msg.str(), t, y);
    throw StepUnderflow(msg.str(), t, y);
}

// Reports the last accepted point, which is still inside the domain.
void check_domain(const OdeOptions& opt, double t, double t_new, const Vec& y, const Vec& y_new) {
    if (opt.domain && !opt.domain(y_new)) {
        std::ostringstream msg;
        msg << "integrate_ode: trajectory left the domain between t = " << t << " and t = " << t_new;
        throw DomainExit(msg.str(), t, y);
    }
}

void integrate_explicit(const VectorFunction& f, const Vec& x0, TimeSpan span,
                        const IntegratorConfig& c, const OdeOptions& opt, Trajectory& traj) {
    Field field(f, traj);
    Recorder out(traj, opt.output_times);
    double t = span.t0;
    Vec y = x0;
    Vec k1 = field(y);
    if (out.every_step()) out.record(t, y);
    out.record_until(t, [&](double) { return y; });

    double h = initial_step(y, k1, span.t1 - span.t0, c, 5.0);
    const double hmin_rel = 1e-14;
    bool domain_failure = false;
    std::string last_error;
    long steps = 0;

    while (t < span.t1) {
        if (++steps > c.max_steps) throw StepUnderflow("integrate_ode: max_steps exceeded", t, y);
        h = std::min(h, c.max_step);
        const bool last = t + h >= span.t1;
        const double hs = last ? span.t1 - t : h;
        if (hs < hmin_rel * std::max(1.0, std::abs(t))) fail_small_step(t, y, domain_failure, last_error);

        Vec k2, k3, k4, k5, k6, k7, y_new;
        try {
            k2 = field(y + hs * (a21 * k1));
            k3 = field(y + hs * (a31 * k1 + a32 * k2));
            k4 = field(y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = field(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = field(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y_new = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            k7 = field(y_new);
        } catch (const Error& e) {
            domain_failure = dynamic_cast<const DomainError*>(&e) != nullptr;
            last_error = e.what();
            ++traj.rejected_steps;
            h = hs * 0.25;
            continue;
        }
        const Vec err_vec = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double err = wrms(err_vec, y, y_new, c);
        if (err <= 1.0) {
            const double t_new = last ? span.t1 : t + hs;
            check_domain(opt, t, t_new, y, y_new);
            ++traj.accepted_steps;
            domain_failure = false;
            if (out.every_step()) {
                out.record(t_new, y_new);
            } else {
                const Vec diff = y_new - y;
                const Vec bspl = hs * k1 - diff;
                const Vec r4 = diff - hs * k7 - bspl;
                const Vec r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                out.record_until(t_new, [&](double tout) -> Vec {
                    if (tout >= t_new) return y_new;
                    const double th = (tout - t) / hs;
                    const double th1 = 1.0 - th;
                    return y + th * (diff + th1 * (bspl + th * (r4 + th1 * r5)));
                });
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = hs * fac;
        } else {
            ++traj.rejected_steps;
            h = hs * std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    out.record_until(span.t1, [&](double) { return y; });
}

class RadauStepper {
public:
    RadauStepper(const Field& field, const IntegratorConfig& c, const MatrixFunction& jac)
        : field_(field), c_(c), jac_(jac) {}

    Mat jacobian(const Vec& y) const {
        if (jac_) return jac_(y);
        return fd_jacobian([this](const Vec& x) { return field_(x); }, y, fd_step(y));
    }

    // One collocation step; false when the simplified Newton iteration fails.
    bool step(const Vec& y, double h, const Mat& J, Vec& y_new) const {
        const Index n = y.size();
        Mat M = Mat::Identity(3 * n, 3 * n);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) M.block(i * n, j * n, n, n) -= h * kRadauA[i][j] * J;
        Eigen::PartialPivLU<Mat> lu(M);
        Vec Z = Vec::Zero(3 * n);
        Vec F(3 * n);
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 12; ++it) {
            for (int i = 0; i < 3; ++i) F.segment(i * n, n) = field_(y + Z.segment(i * n, n));
            Vec G = Z;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) G.segment(i * n, n) -= h * kRadauA[i][j] * F.segment(j * n, n);
            const Vec dZ = -lu.solve(G);
            if (!dZ.allFinite()) return false;
            Z += dZ;
            double nrm = 0.0;
            for (int i = 0; i < 3; ++i) nrm = std::max(nrm, wrms(dZ.segment(i * n, n), y, y, c_));
            if (nrm <= 1e-3) {
                y_new = y + Z.segment(2 * n, n);
                return true;
            }
            if (it > 0 && nrm > 0.9 * prev) return false;
            prev = nrm;
        }
        return false;
    }

private:
    const Field& field_;
    const IntegratorConfig& c_;
    const MatrixFunction& jac_;
};

void integrate_implicit(const VectorFunction& f, const Vec& x0, TimeSpan span,
                        const IntegratorConfig& c, const OdeOptions& opt, Trajectory& traj) {
    Field field(f, traj);
    RadauStepper radau(field, c, opt.jacobian);
    Recorder out(traj, opt.output_times);
    double t = span.t0;
    Vec y = x0;
    if (out.every_step()) out.record(t, y);
    out.record_until(t, [&](double) { return y; });

    double h = initial_step(y, field(y), span.t1 - span.t0, c, 5.0);
    const double hmin_rel = 1e-14;
    bool domain_failure = false;
    std::string last_error;
    long steps = 0;

    while (t < span.t1) {
        if (++steps > c.max_steps) throw StepUnderflow("integrate_ode: max_steps exceeded", t, y);
        h = std::min(h, c.max_step);
        double target = span.t1;
        if (!out.every_step() && !out.done()) target = std::min(target, out.next_time());
        const bool hits_target = t + h >= target;
        const double hs = hits_target ? target - t : h;
        if (hs <= 0.0) {
            out.record_until(t, [&](double) { return y; });
            continue;
        }
        if (hs < hmin_rel * std::max(1.0, std::abs(t))) fail_small_step(t, y, domain_failure, last_error);

        Vec full, half, y_new;
        bool ok = false;
        try {
            const Mat J0 = radau.jacobian(y);
            ok = radau.step(y, hs, J0, full) && radau.step(y, 0.5 * hs, J0, half) &&
                 radau.step(half, 0.5 * hs, radau.jacobian(half), y_new);
        } catch (const Error& e) {
            domain_failure = dynamic_cast<const DomainError*>(&e) != nullptr;
            last_error = e.what();
            ok = false;
        }
        if (!ok) {
            ++traj.rejected_steps;
            h = hs * 0.25;
            continue;
        }
        // Controls the error of the single full step; the two half steps, about
        // 31 times more accurate, are kept, which leaves room for accumulation.
        const double err = wrms(y_new - full, y, y_new, c);
        if (err <= 1.0) {
            const double t_new = hits_target ? target : t + hs;
            check_domain(opt, t, t_new, y, y_new);
            ++traj.accepted_steps;
            domain_failure = false;
            t = t_new;
            y = y_new;
            if (out.every_step()) out.record(t, y);
            else out.record_until(t, [&](double) { return y; });
            const double fac = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(err, -1.0 / 6.0), 0.2, 4.0);
            // a step clipped to an output time does not shrink the proposal
            h = std::max(h, hs * fac);
            if (!hits_target) h = hs * fac;
        } else {
            ++traj.rejected_steps;
            h = hs * std::max(0.2, 0.9 * std::pow(err, -1.0 / 6.0));
        }
    }
    out.record_until(span.t1, [&](double) { return y; });
}

}  // namespace

Trajectory integrate_ode(const VectorFunction& field, const Vec& x0, TimeSpan span,
                         const IntegratorConfig& config, const OdeOptions& options) {
    config.validate();
    require_finite(x0, "integrate_ode: x0");
    if (!(span.t1 > span.t0)) throw ConfigError("integrate_ode: empty time span");
    validate_outputs(options.output_times, span);
    if (options.domain && !options.domain(x0))
        throw DomainExit("integrate_ode: initial state outside the domain", span.t0, x0);

    Trajectory traj;
    IntegratorMode mode = config.mode;
    if (mode == IntegratorMode::auto_select)
        mode = options.declared_epsilon && *options.declared_epsilon < config.stiffness_threshold
                   ? IntegratorMode::implicit_stiff
                   : IntegratorMode::explicit_adaptive;
    traj.mode_used = mode;
    if (mode == IntegratorMode::implicit_stiff)
        integrate_implicit(field, x0, span, config, options, traj);
    else
        integrate_explicit(field, x0, span, config, options, traj);
    return traj;
}

}  // namespace dae::num
