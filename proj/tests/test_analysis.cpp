#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "dae/analysis.hpp"
#include "dae/errors.hpp"

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

// Same DAE with E and F multiplied on the left by a constant invertible matrix.
model::Scenario left_multiplied(const model::Scenario& s, const Mat& m) {
    model::Scenario t = s;
    const auto e = s.system.E;
    const auto f = s.system.F;
    const auto df = s.system.dF;
    const auto de = s.system.dE;
    t.system.E = [e, m](const Vec& x) { return Mat(m * e(x)); };
    t.system.F = [f, m](const Vec& x) { return Vec(m * f(x)); };
    if (df) t.system.dF = [df, m](const Vec& x) { return Mat(m * df(x)); };
    if (de)
        t.system.dE = [de, m](const Vec& x) {
            auto d = de(x);
            for (auto& k : d) k = m * k;
            return d;
        };
    model::attach_compression_reference(t.system);
    return t;
}

}  // namespace

TEST_CASE("verdict names", "[analysis]") {
    CHECK(analysis::to_string(analysis::Verdict::not_refuted) == "not_refuted");
    CHECK(analysis::to_string(analysis::Verdict::refuted) == "refuted");
    CHECK(analysis::to_string(analysis::Verdict::inconclusive) == "inconclusive");
}

TEST_CASE("sampling is deterministic and respects the domain", "[analysis][sampling]") {
    const auto s = model::scenario_circuit();
    auto region = analysis::SampleRegion::scenario_default(s, 50, 7);
    region.include = {v3(0, 1.0, 0), v3(0.1, 0.2, 0.3)};
    const auto a = analysis::sample_region(region, s.system.domain);
    const auto b = analysis::sample_region(region, s.system.domain);
    REQUIRE(a.size() == 51);
    CHECK((a.front() - v3(0.1, 0.2, 0.3)).norm() == 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i] - b[i]).norm() == 0.0);
        CHECK(s.system.domain(a[i]));
    }
    region.seed = 8;
    CHECK((analysis::sample_region(region, s.system.domain)[1] - a[1]).norm() > 0.0);

    region.upper[0] = -1.0;
    CHECK_THROWS_AS(analysis::sample_region(region, s.system.domain), ConfigError);
}

TEST_CASE("CR holds for the cubic away from the fold", "[analysis][cr]") {
    const auto s = model::scenario_cubic();
    const auto report = analysis::check_cr(s, analysis::SampleRegion::scenario_default(s));
    CHECK(report.rank_E == 1);
    CHECK(report.rank_E_constant);
    CHECK(report.cr_verdict == analysis::Verdict::not_refuted);
    CHECK(report.cr_failures.empty());
}

TEST_CASE("CR is refuted at the cubic fold and the point is reported", "[analysis][cr][errors]") {
    const auto s = model::scenario_cubic();
    auto region = analysis::SampleRegion::scenario_default(s, 20);
    const double fold = std::sqrt(3.0) / 3.0;
    region.include = {v2(0.0, fold)};
    const auto report = analysis::check_cr(s, region);
    CHECK(report.cr_verdict == analysis::Verdict::refuted);
    REQUIRE_FALSE(report.cr_failures.empty());
    CHECK((report.cr_failures.front() - v2(0.0, fold)).norm() < 1e-9);
    CHECK(report.cr_detail.find("rank E ker DF2 = 0") != std::string::npos);
}

TEST_CASE("index-1 test examples", "[analysis][index1]") {
    const auto cubic = model::scenario_cubic();
    const auto a = analysis::index1_test(cubic, v2(0.0, 1.0));
    CHECK(a.index1);
    CHECK(a.rank_A == 2);
    // A = [[1, 3x2^2 - 1], [1, 0]] at x2 = 1.
    CHECK(a.det_A == Approx(-2.0).margin(1e-12));

    const auto circuit = model::scenario_circuit();
    const auto b = analysis::index1_test(circuit, Vec::Zero(3));
    CHECK(b.index1);
    // A = [[0, 0, 1], [0, 1, 1], [1, -2, 0]].
    CHECK(b.det_A == Approx(-1.0).margin(1e-12));

    const auto fold = analysis::index1_test(cubic, v2(0.0, std::sqrt(3.0) / 3.0));
    CHECK_FALSE(fold.index1);
    CHECK(fold.rank_A == 1);
}

TEST_CASE("index-1 test projects onto the constraints first", "[analysis][index1]") {
    const auto s = model::scenario_circuit();
    const auto r = analysis::index1_test(s, v3(0.2, 0.1, 0.05));
    CHECK(model::constraint_map(s.system, r.point).norm() <= 1e-12);
    CHECK(r.index1);
}

TEST_CASE("index-1 verdict is invariant under left multiplication", "[analysis][index1][property]") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> g;
    for (const auto& s : {model::scenario_cubic(), model::scenario_circuit()}) {
        const Index n = s.system.n;
        for (int k = 0; k < 10; ++k) {
            Mat m = Mat::NullaryExpr(n, n, [&] { return g(rng); });
            m.diagonal().array() += 3.0;
            const auto t = left_multiplied(s, m);
            for (const Vec& x : analysis::sample_region(analysis::SampleRegion::scenario_default(s, 10, k), s.system.domain)) {
                const auto a = analysis::index1_test(s, x);
                const auto b = analysis::index1_test(t, x);
                CHECK(a.index1 == b.index1);
                CHECK(a.rank_A == b.rank_A);
            }
        }
    }
}

TEST_CASE("circuit kernel distribution is involutive", "[analysis][involutive][property]") {
    const auto s = model::scenario_circuit();
    const auto samples = analysis::sample_region(analysis::SampleRegion::scenario_default(s, 100, 3), s.system.domain);
    REQUIRE(samples.size() == 100);
    for (const Vec& x : samples) {
        const auto r = analysis::involutivity_check(s, x);
        CHECK(r.kernel_dim == 2);
        CHECK(r.residual <= 1e-6);
        CHECK(r.verdict == analysis::Verdict::not_refuted);
    }
}

TEST_CASE("contact distribution is not involutive", "[analysis][involutive]") {
    const auto s = model::scenario_contact();
    const auto r = analysis::involutivity_check(s, v3(0.1, 0.3, -0.2));
    CHECK(r.verdict == analysis::Verdict::refuted);
    // [d2, d1 + x2 d3] = d3, normalised frame: residual of order one.
    CHECK(r.residual > 0.1);
    const auto report = analysis::analyze(s, analysis::SampleRegion::scenario_default(s, 30));
    CHECK(report.involutive_verdict == analysis::Verdict::refuted);
    CHECK_FALSE(report.structural_pass());
}

TEST_CASE("structural analysis of the regular scenarios", "[analysis]") {
    for (const auto& s : {model::scenario_cubic(), model::scenario_circuit(), model::builtin_scenario("linear")}) {
        const auto report = analysis::analyze(s, analysis::SampleRegion::scenario_default(s, 100));
        INFO(s.name << ": " << report.cr_detail);
        CHECK(report.structural_pass());
        CHECK(report.min_abs_det_A > 0.1);
        CHECK(report.samples_used == 100);
    }
}

TEST_CASE("on_manifold examples", "[analysis][manifold]") {
    const auto cubic = model::scenario_cubic();
    CHECK(analysis::on_manifold(cubic, v2(0.0, 1.0)));
    CHECK_FALSE(analysis::on_manifold(cubic, v2(1.0, 0.7)));
    // Zero of F2 on the other branch.
    CHECK_FALSE(analysis::on_manifold(cubic, v2(0.0, 0.2)));

    const auto circuit = model::scenario_circuit();
    CHECK(analysis::on_manifold(circuit, Vec::Zero(3)));
    CHECK_FALSE(analysis::on_manifold(circuit, v3(0.0, 0.0, 0.1)));
    CHECK_FALSE(analysis::on_manifold(circuit, v3(0.0, 1.0, -1.0)));
    CHECK_FALSE(analysis::on_manifold(circuit, Vec::Zero(2)));
}

TEST_CASE("a passing CR check implies constant kernel dimension", "[analysis][cr][property]") {
    for (const auto& s : {model::scenario_cubic(), model::scenario_circuit(), model::scenario_contact()}) {
        const auto region = analysis::SampleRegion::scenario_default(s, 100, 5);
        const auto report = analysis::check_cr(s, region);
        if (report.cr_verdict != analysis::Verdict::not_refuted) continue;
        for (const Vec& x : analysis::sample_region(region, s.system.domain))
            CHECK(num::kernel_basis(s.system.E(x)).cols() == s.system.n - report.rank_E);
    }
}
