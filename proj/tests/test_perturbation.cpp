#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "dae/errors.hpp"
#include "dae/jumps.hpp"
#include "dae/perturbation.hpp"
#include "oracles.hpp"

using namespace dae;
using Catch::Approx;
using num::Index;
using num::Mat;
using num::Vec;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec v3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

std::vector<Vec> chart_samples(const model::Scenario& s, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> out;
    while (static_cast<int>(out.size()) < count) {
        Vec x(s.system.n);
        for (Index i = 0; i < x.size(); ++i) x[i] = s.box_lower[i] + (s.box_upper[i] - s.box_lower[i]) * u(rng);
        if (s.chart->chart_domain(x)) out.push_back(x);
    }
    return out;
}

num::IntegratorConfig tight() {
    num::IntegratorConfig c;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-12;
    return c;
}

}  // namespace

TEST_CASE("perturbed circuit field matches the closed form", "[perturb][circuit][property]") {
    const auto s = model::scenario_circuit();
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto field = perturb::build_perturbed_field(s, eps);
        for (const Vec& x : chart_samples(s, 100, 71)) {
            const Eigen::Vector3d printed = oracle::circuit_perturbed_field(x, eps);
            const double f1 = oracle::circuit_perturbed_f1_derived(x, eps);
            const Vec got = field(x);
            INFO("eps " << eps << " at " << x.transpose());
            CHECK(std::abs(got[0] - f1) <= 1e-10 * std::max(1.0, std::abs(f1)));
            CHECK(std::abs(got[1] - printed[1]) <= 1e-10 * std::max(1.0, std::abs(printed[1])));
            CHECK(std::abs(got[2] - printed[2]) <= 1e-10 * std::max(1.0, std::abs(printed[2])));
        }
    }
}

TEST_CASE("printed first component has the opposite sign", "[perturb][circuit]") {
    const auto s = model::scenario_circuit();
    for (const Vec& x : chart_samples(s, 20, 67)) {
        const double eps = 1e-2;
        CHECK(oracle::circuit_perturbed_field(x, eps)[0] == Approx(-oracle::circuit_perturbed_f1_derived(x, eps)));
    }
}

TEST_CASE("perturbed circuit field example", "[perturb][circuit]") {
    const auto field = perturb::build_perturbed_field(model::scenario_circuit(), 0.1);
    // Hand evaluation at eta = (0, 0, 0.1), eps = 0.1.
    const Vec v = field(v3(0.0, 0.0, 0.1));
    CHECK(v[0] == Approx(-1.6).margin(1e-12));
    CHECK(v[1] == Approx(-0.8).margin(1e-12));
    CHECK(v[2] == Approx(-0.2).margin(1e-12));
}

TEST_CASE("perturbed field pushes forward to the normal form", "[perturb][property]") {
    for (const auto& s : {model::scenario_cubic(), model::scenario_circuit()}) {
        const auto& c = s.require_chart();
        const Index r = c.r;
        for (double eps : {1e-1, 1e-3}) {
            const auto field = perturb::build_perturbed_field(s, eps);
            for (const Vec& x : chart_samples(s, 200, 73)) {
                const Vec xi = c.psi(x);
                Vec expected(s.system.n);
                expected.head(r) = s.inwf->Fstar(Vec(xi.head(r)));
                expected.tail(s.system.n - r) = -xi.tail(s.system.n - r) / eps;
                const Vec got = c.dpsi(x) * field(x);
                INFO(s.name << " eps " << eps);
                CHECK((got - expected).norm() <= 1e-7 * std::max(1.0, expected.norm()));
            }
        }
    }
}

TEST_CASE("linear perturbed field has the closed form", "[perturb][linear][property]") {
    std::mt19937_64 rng(79);
    std::normal_distribution<double> g;
    for (int k = 0; k < 20; ++k) {
        Mat P = Mat::NullaryExpr(3, 3, [&] { return g(rng); });
        Mat Q = Mat::NullaryExpr(3, 3, [&] { return g(rng); });
        P.diagonal().array() += 4.0;
        Q.diagonal().array() += 4.0;
        Mat A1 = Mat::NullaryExpr(2, 2, [&] { return g(rng); });
        Mat E0 = Mat::Zero(3, 3), H0 = Mat::Zero(3, 3);
        E0.topLeftCorner(2, 2).setIdentity();
        H0.topLeftCorner(2, 2) = A1;
        H0(2, 2) = 1.0;
        const Mat qi = Q.inverse();
        const auto s = model::scenario_linear(qi * E0 * P, qi * H0 * P, {Q, P, A1});
        const double eps = 1e-2;
        Mat D = Mat::Zero(3, 3);
        D.topLeftCorner(2, 2) = A1;
        D(2, 2) = -1.0 / eps;
        const Mat closed = P.inverse() * D * P;
        const auto field = perturb::build_perturbed_field(s, eps);
        const Vec x = Vec::NullaryExpr(3, [&] { return g(rng); });
        const Vec expected = closed * x;
        CHECK((field(x) - expected).norm() <= 1e-9 * std::max(1.0, expected.norm()));
    }
}

TEST_CASE("perturbed field errors", "[perturb][errors]") {
    const auto s = model::scenario_circuit();
    CHECK_THROWS_AS(perturb::build_perturbed_field(s, 0.0), ConfigError);
    CHECK_THROWS_AS(perturb::build_perturbed_field(s, -1e-3), ConfigError);
    CHECK_THROWS_AS(perturb::build_perturbed_field(model::scenario_contact(), 1e-2), CapabilityError);
    const auto field = perturb::build_perturbed_field(s, 1e-2);
    CHECK_THROWS_AS(field(v3(0.0, 1.5, 0.0)), DomainError);
    CHECK(field.condition_estimate(v3(0.0, 0.0, 0.1)) < 1e6);
}

TEST_CASE("the consistency manifold is invariant under the perturbed flow", "[perturb][property]") {
    for (const auto& [s, xm] : {std::make_pair(model::scenario_cubic(), v2(1.0, 0.7)),
                                std::make_pair(model::scenario_circuit(), v3(0.0, 0.0, 0.1))}) {
        const Vec p = jumps::project_consistent_chart(s, xm).x_plus;
        const auto field = perturb::build_perturbed_field(s, 1e-2);
        const auto traj = perturb::integrate_perturbed(field, p, {0.0, 0.5}, tight());
        double worst = 0.0;
        for (const Vec& x : traj.states) worst = std::max(worst, model::constraint_map(s.system, x).norm());
        INFO(s.name);
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("fast coordinate decays exponentially", "[perturb][property]") {
    const auto s = model::scenario_circuit();
    const auto& c = s.require_chart();
    const Vec xm = v3(0.0, 0.0, 0.1);
    const Vec xi0 = c.psi(xm);
    auto cfg = num::IntegratorConfig{};
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto field = perturb::build_perturbed_field(s, eps);
        std::vector<double> times;
        for (int k = 1; k <= 50; ++k) times.push_back(eps * k / 10.0);
        const auto traj = perturb::integrate_perturbed(field, xm, {0.0, times.back()}, cfg, times);
        REQUIRE(traj.states.size() == times.size());
        const double tol = cfg.abs_tol + cfg.rel_tol;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const Vec xi = c.psi(traj.states[i]);
            const Vec layer = std::exp(-times[i] / eps) * xi0.tail(2);
            INFO("eps " << eps << " t " << times[i]);
            CHECK((xi.tail(2) - layer).norm() <= 10 * tol);
            // The slow coordinate follows xi1' = -2 xi1.
            CHECK(xi[0] == Approx(0.1 * std::exp(-2.0 * times[i])).margin(10 * tol));
        }
    }
}

TEST_CASE("reduced circuit solution", "[perturb][reduced][circuit]") {
    const auto s = model::scenario_circuit();
    const Vec p = jumps::project_consistent_chart(s, v3(0.0, 0.0, 0.1)).x_plus;
    const num::IntegratorConfig cfg;
    const auto traj = perturb::integrate_reduced(s, p, {0.0, 1.0}, cfg, {0.25, 0.5, 1.0});
    REQUIRE(traj.states.size() == 3);
    const double tol = cfg.abs_tol + cfg.rel_tol;
    for (std::size_t i = 0; i < 3; ++i) {
        const double xi1 = s.chart->psi(traj.states[i])[0];
        CHECK(xi1 == Approx(0.1 * std::exp(-2.0 * traj.times[i])).margin(10 * tol));
        const Vec expected = oracle::circuit_projection(0.1 * std::exp(-2.0 * traj.times[i]));
        CHECK((traj.states[i] - expected).norm() <= 1e-7);
    }
}

TEST_CASE("reduced cubic solution against a small-step oracle", "[perturb][reduced][cubic]") {
    const auto s = model::scenario_cubic();
    const Vec p = jumps::project_consistent_chart(s, v2(1.0, 0.7)).x_plus;
    // On x1 = 0 the DAE reads (3 x2^2 - 1) x2' = -x2.
    auto euler = [&](double x2, double T, int steps) {
        const double h = T / steps;
        for (int i = 0; i < steps; ++i) x2 += h * (-x2 / (3.0 * x2 * x2 - 1.0));
        return x2;
    };
    const double T = 0.5;
    const double oracle_x2 = 2.0 * euler(p[1], T, 400000) - euler(p[1], T, 200000);
    num::IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-12;
    const auto traj = perturb::integrate_reduced(s, p, {0.0, T}, cfg, {T});
    CHECK(std::abs(traj.states.back()[0]) <= 1e-12);
    CHECK(traj.states.back()[1] == Approx(oracle_x2).margin(1e-8));
}

TEST_CASE("reduced solve requires a consistent start", "[perturb][reduced][errors]") {
    const auto s = model::scenario_circuit();
    CHECK_THROWS_AS(perturb::integrate_reduced(s, v3(0.0, 0.0, 0.1), {0.0, 1.0}, {}), PreconditionError);
}

TEST_CASE("convergence study on the cubic", "[perturb][convergence]") {
    const auto s = model::scenario_cubic();
    perturb::ConvergenceOptions opt;
    opt.uniform_points = 51;
    opt.layer_points = 30;
    const auto rep = perturb::convergence_study(s, v2(1.0, 0.7), {1e-1, 1e-2, 1e-3}, 0.05, 1.0, {}, opt);
    REQUIRE(rep.sup_errors.size() == 3);
    CHECK(rep.decreasing);
    CHECK(rep.sup_errors[0] > rep.sup_errors[1]);
    CHECK(rep.sup_errors[1] > rep.sup_errors[2]);
    CHECK(rep.layer_pass);
    CHECK(rep.pass);
    CHECK(rep.integration_tol == Approx(1.01e-8));
    for (const auto& e : rep.entries) {
        CHECK(e.valid);
        CHECK(e.times.size() == e.perturbed.size());
        CHECK(e.times.size() == e.reduced.size());
    }
}

TEST_CASE("convergence study configuration errors", "[perturb][convergence][errors]") {
    const auto s = model::scenario_circuit();
    const Vec xm = v3(0.0, 0.0, 0.1);
    CHECK_THROWS_AS(perturb::convergence_study(s, xm, {1e-1, 1e-2}, 0.05, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(perturb::convergence_study(s, xm, {1e-1, 1e-3, 1e-2}, 0.05, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(perturb::convergence_study(s, xm, {1e-1, 1e-2, 0.0}, 0.05, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(perturb::convergence_study(s, xm, {1e-1, 1e-2, 1e-3}, 1.0, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(perturb::convergence_study(s, xm, {1e-1, 1e-2, 1e-3}, 0.0, 1.0, {}), ConfigError);
}
