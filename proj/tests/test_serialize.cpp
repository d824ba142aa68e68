#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dae/errors.hpp"
#include "dae/jumps.hpp"
#include "dae/serialize.hpp"

using namespace dae;
using num::Index;
using num::Mat;
using num::Vec;
using json = io::json;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("vectors and matrices round-trip exactly", "[serialize][property]") {
    std::mt19937_64 rng(83);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        const Vec v = Vec::NullaryExpr(1 + k % 5, [&] { return g(rng) * std::pow(10.0, k % 7 - 3); });
        const Vec back = io::vec_from_json(json::parse(io::to_json(v).dump()));
        CHECK((back - v).norm() == 0.0);
        const Mat m = Mat::NullaryExpr(1 + k % 3, 2 + k % 2, [&] { return g(rng); });
        CHECK((io::mat_from_json(json::parse(io::to_json(m).dump())) - m).norm() == 0.0);
    }
}

TEST_CASE("malformed arrays are rejected", "[serialize][errors]") {
    CHECK_THROWS_AS(io::vec_from_json(json::parse(R"([1, "a"])")), ConfigError);
    CHECK_THROWS_AS(io::vec_from_json(json::parse("3")), ConfigError);
    CHECK_THROWS_AS(io::mat_from_json(json::parse("[[1, 2], [3]]")), ConfigError);
    CHECK_THROWS_AS(io::mat_from_json(json::parse("[]")), ConfigError);
}

TEST_CASE("format_double round-trips", "[serialize]") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0})
        CHECK(std::stod(io::format_double(v)) == v);
}

TEST_CASE("scenario documents round-trip", "[serialize][scenario]") {
    for (const auto& name : model::builtin_names()) {
        const auto s = model::builtin_scenario(name);
        const auto back = io::scenario_from_json(json::parse(io::scenario_to_json(s).dump()));
        CHECK(back.name == s.name);
        CHECK(back.system.n == s.system.n);
        CHECK(back.reference_points.size() == s.reference_points.size());
        for (const auto& [key, p] : s.reference_points) CHECK((back.reference_points.at(key) - p).norm() == 0.0);
    }
}

TEST_CASE("linear scenario from a document", "[serialize][scenario]") {
    const auto doc = json::parse(R"({
        "name": "permuted",
        "linear": {"E": [[0, 0], [0, 1]], "H": [[1, 0], [0, 0.5]],
                   "Q": [[0, 1], [1, 0]], "P": [[0, 1], [1, 0]]},
        "reference_points": {"x0_minus": [0.3, 2.0]}
    })");
    const auto s = io::scenario_from_json(doc);
    CHECK(s.name == "permuted");
    REQUIRE(s.linear.has_value());
    CHECK(s.linear->A1(0, 0) == 0.5);
    CHECK((s.reference_points.at("x0_minus") - Vec::LinSpaced(2, 0.3, 2.0)).norm() == 0.0);
    // Consistent point: the algebraic variable x1 vanishes.
    Vec x(2);
    x << 0.3, 2.0;
    const auto r = jumps::project_consistent_chart(s, x);
    CHECK(r.x_plus[0] == 0.0);
    CHECK(r.x_plus[1] == 2.0);
}

TEST_CASE("invalid scenario documents", "[serialize][scenario][errors]") {
    CHECK_THROWS_AS(io::scenario_from_json(json::parse("[]")), ConfigError);
    CHECK_THROWS_AS(io::scenario_from_json(json::parse(R"({"name": "unknown"})")), ConfigError);
    CHECK_THROWS_AS(io::scenario_from_json(json::parse(R"({"name": "cubic", "dimension": 3})")), ConfigError);
    CHECK_THROWS_AS(io::scenario_from_json(json::parse(R"({"name": "cubic", "reference_points": {"a": [1]}})")),
                    ConfigError);
    CHECK_THROWS_AS(io::scenario_from_json(json::parse(R"({"name": "l", "linear": {"E": [[1]]}})")), ConfigError);
    CHECK_THROWS_AS(io::scenario_from_json(json::parse(
                        R"({"name": "l", "linear": {"E": [[1, 0], [0, 0]], "H": [[1, 0], [0, 1]],
                                                    "Q": [[1, 0], [0, 1]], "P": [[0, 0], [0, 0]]}})")),
                    ValidationError);
    CHECK_THROWS_AS(io::load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("load_scenario reads files", "[serialize][scenario]") {
    const auto path = std::filesystem::temp_directory_path() / "dae_jump_test_scenario.json";
    {
        std::ofstream f(path);
        f << R"({"name": "circuit", "reference_points": {"eta0_minus": [0, 0, 0.2]}})";
    }
    const auto s = io::load_scenario(path.string());
    CHECK(s.name == "circuit");
    CHECK(s.reference_points.at("eta0_minus")[2] == 0.2);
    {
        std::ofstream f(path);
        f << "{ not json";
    }
    CHECK_THROWS_AS(io::load_scenario(path.string()), ConfigError);
    std::filesystem::remove(path);
    CHECK(io::load_scenario("cubic").name == "cubic");
}

TEST_CASE("jump report JSON fields", "[serialize]") {
    const auto s = model::scenario_cubic();
    Vec x(2);
    x << 1.0, 0.7;
    const json j = io::to_json(jumps::jump_kernel_rule(s, x));
    CHECK(j["method"] == "kernel_rule");
    CHECK(j["x_plus"].size() == 2);
    CHECK(j["kernel_residual"].is_number());
    CHECK(j["error_estimate"].is_null());
    CHECK(j["diagnostics"].is_array());
}

TEST_CASE("trajectory CSV layout", "[serialize][csv]") {
    num::Trajectory t;
    t.times = {0.0, 0.5};
    Vec a(2), b(2);
    a << 1.0, 2.0;
    b << 0.1, -0.25;
    t.states = {a, b};
    std::ostringstream os;
    io::write_trajectory_csv(os, t);
    const auto l = lines(os.str());
    REQUIRE(l.size() == 3);
    CHECK(l[0] == "t,x1,x2");
    CHECK(l[1] == "0,1,2");
    CHECK(l[2] == "0.5,0.10000000000000001,-0.25");
}

TEST_CASE("convergence CSV layout", "[serialize][csv]") {
    perturb::ConvergenceReport r;
    r.x_minus = Vec::Zero(2);
    perturb::ConvergenceEntry e;
    e.epsilon = 0.5;
    e.valid = true;
    e.times = {0.0};
    e.perturbed = {Vec::Ones(2)};
    e.reduced = {Vec::Zero(2)};
    e.state_error = {std::sqrt(2.0)};
    e.layer_deviation = {0.0};
    r.entries = {e};
    r.sup_errors = {std::nan("")};
    std::ostringstream os;
    io::write_convergence_csv(os, r);
    const auto l = lines(os.str());
    REQUIRE(l.size() == 2);
    CHECK(l[0] == "eps,t,x1,x2,ref1,ref2,error,layer_deviation");
    CHECK(l[1].rfind("0.5,0,1,1,0,0,", 0) == 0);
    CHECK(io::to_json(r)["sup_errors"][0].is_null());
}
