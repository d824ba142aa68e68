#include "dae/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "dae/analysis.hpp"
#include "dae/jumps.hpp"
#include "dae/perturbation.hpp"
#include "dae/serialize.hpp"

namespace dae::cli {

using io::json;
using num::Index;
using num::Vec;

namespace {

const std::vector<std::string> kCommands{"analyze", "jump", "simulate", "converge"};

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())); }

Vec parse_point(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse '" + text + "' as a comma-separated list of numbers");
        }
    }
    if (values.empty()) throw ConfigError("empty point '" + text + "'");
    return to_vec(values);
}

std::string point_string(const Vec& x, int precision = 10) {
    std::ostringstream os;
    os.precision(precision);
    os << "(";
    for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

std::string eps_label(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eps);
    return buf;
}

template <typename T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void apply_integrator_json(const json& j, num::IntegratorConfig& c) {
    if (!j.is_object()) throw ConfigError("config key 'integrator' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "rel_tol") c.rel_tol = get_field<double>(j, "rel_tol");
        else if (key == "abs_tol") c.abs_tol = get_field<double>(j, "abs_tol");
        else if (key == "max_step") c.max_step = get_field<double>(j, "max_step");
        else if (key == "stiffness_threshold") c.stiffness_threshold = get_field<double>(j, "stiffness_threshold");
        else if (key == "max_steps") c.max_steps = get_field<int>(j, "max_steps");
        else if (key == "mode") c.mode = num::integrator_mode_from_string(get_field<std::string>(j, "mode"));
        else throw ConfigError("unknown integrator key '" + key + "'");
    }
}

void apply_config_file(const std::filesystem::path& path, RunConfig& c) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config file '" + path.string() + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must contain a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "command") c.command = get_field<std::string>(j, "command");
        else if (key == "scenario") c.scenario = get_field<std::string>(j, "scenario");
        else if (key == "initial_point") c.initial_point = io::vec_from_json(value);
        else if (key == "eps_list") c.eps_list = get_field<std::vector<double>>(j, "eps_list");
        else if (key == "t_span") {
            const auto span = get_field<std::vector<double>>(j, "t_span");
            if (span.size() != 2) throw ConfigError("config key 't_span' needs two values");
            c.t0 = span[0];
            c.t1 = span[1];
        } else if (key == "window_start") c.window_start = get_field<double>(j, "window_start");
        else if (key == "integrator") apply_integrator_json(value, c.integrator);
        else if (key == "output_dir") c.output_dir = get_field<std::string>(j, "output_dir");
        else if (key == "seed") c.seed = get_field<std::uint64_t>(j, "seed");
        else if (key == "samples") c.samples = get_field<int>(j, "samples");
        else if (key == "output_points") c.output_points = get_field<int>(j, "output_points");
        else if (key == "reduced_only") c.reduced_only = get_field<bool>(j, "reduced_only");
        else if (key == "region") {
            c.region = std::make_pair(io::vec_from_json(value.at("lower")), io::vec_from_json(value.at("upper")));
        } else if (key == "probes") {
            c.probes.clear();
            for (const auto& p : value) c.probes.push_back(io::vec_from_json(p));
        } else
            throw ConfigError("unknown config key '" + key + "'");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::filesystem::path prepare_output(const RunConfig& c) {
    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec) throw Error("cannot create output directory '" + c.output_dir.string() + "': " + ec.message());
    return c.output_dir;
}

Vec initial_point(const RunConfig& c, const model::Scenario& s) {
    Vec x;
    if (c.initial_point) {
        x = *c.initial_point;
    } else {
        auto it = std::find_if(s.reference_points.begin(), s.reference_points.end(), [](const auto& kv) {
            return kv.first.size() >= 6 && kv.first.compare(kv.first.size() - 6, 6, "_minus") == 0;
        });
        if (it == s.reference_points.end()) it = s.reference_points.begin();
        if (it == s.reference_points.end()) throw ConfigError("scenario has no default initial point; pass --x0");
        x = it->second;
    }
    if (x.size() != s.system.n)
        throw ConfigError("initial point has dimension " + std::to_string(x.size()) + ", scenario '" + s.name +
                          "' has dimension " + std::to_string(s.system.n));
    if (!s.system.domain(x)) throw DomainError("initial point " + point_string(x) + " outside the domain (" +
                                                   s.system.domain.description + ")",
                                               x);
    return x;
}

std::vector<double> uniform_grid(double t0, double t1, int points) {
    std::vector<double> grid;
    const int m = std::max(points, 2);
    for (int i = 0; i < m; ++i) grid.push_back(t0 + (t1 - t0) * static_cast<double>(i) / (m - 1));
    grid.back() = t1;
    return grid;
}

// Integrates in chunks of output times so that a failure still leaves the
// samples computed up to that point.
num::Trajectory integrate_in_chunks(const std::function<num::Trajectory(const Vec&, num::TimeSpan,
                                                                         const std::vector<double>&)>& integrate,
                                    const Vec& x0, const std::vector<double>& grid, std::string& error) {
    num::Trajectory acc;
    acc.times.push_back(grid.front());
    acc.states.push_back(x0);
    constexpr std::size_t chunk = 25;
    Vec x = x0;
    for (std::size_t i = 0; i + 1 < grid.size();) {
        const std::size_t j = std::min(i + chunk, grid.size() - 1);
        const std::vector<double> outs(grid.begin() + static_cast<long>(i) + 1, grid.begin() + static_cast<long>(j) + 1);
        try {
            const num::Trajectory part = integrate(x, {grid[i], grid[j]}, outs);
            acc.times.insert(acc.times.end(), part.times.begin(), part.times.end());
            acc.states.insert(acc.states.end(), part.states.begin(), part.states.end());
            acc.mode_used = part.mode_used;
            acc.accepted_steps += part.accepted_steps;
            acc.rejected_steps += part.rejected_steps;
            acc.field_evaluations += part.field_evaluations;
            x = part.states.back();
        } catch (const Error& e) {
            error = e.what();
            break;
        }
        i = j;
    }
    return acc;
}

}  // namespace

void RunConfig::validate() const {
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw ConfigError("unknown command '" + command + "' (expected analyze, jump, simulate or converge)");
    if (scenario.empty()) throw ConfigError("no scenario given (--scenario NAME or path to a scenario JSON file)");
    if (!(t0 < t1)) throw ConfigError("need t0 < t1");
    for (double e : eps_list)
        if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("epsilon values must be positive");
    if (samples < 1) throw ConfigError("samples must be at least 1");
    if (output_points < 2) throw ConfigError("output_points must be at least 2");
    if (region && region->first.size() != region->second.size())
        throw ConfigError("region bounds have different dimensions");
    integrator.validate();
}

RunConfig parse_arguments(int argc, const char* const* argv) {
    CLI::App app{"Consistent initialization and jump analysis for index-1 nonlinear DAEs", "dae-jump"};
    std::string command, scenario, config_file, out_dir, x0_text, mode;
    std::vector<double> eps, region;
    std::vector<std::string> probes;
    double t0 = 0.0, t1 = 1.0, window_start = 0.0, rtol = 0.0, atol = 0.0, max_step = 0.0;
    std::uint64_t seed = 0;
    int samples = 0, points = 0;
    bool reduced_only = false;

    app.add_option("command", command, "analyze | jump | simulate | converge")->required();
    auto* o_scenario = app.add_option("--scenario", scenario, "built-in name (cubic, circuit, contact, linear) or scenario JSON path");
    app.add_option("--config", config_file, "JSON config file; command-line flags override its values");
    auto* o_x0 = app.add_option("--x0", x0_text, "initial point v1,v2,...");
    auto* o_eps = app.add_option("--eps", eps, "epsilon values e1,e2,...")->delimiter(',');
    auto* o_t0 = app.add_option("--t0", t0, "start of the time span (default 0)");
    auto* o_t1 = app.add_option("--t1", t1, "end of the time span (default 1)");
    auto* o_window = app.add_option("--window-start", window_start, "converge: start of the error window after t0 (default 0.05)");
    auto* o_out = app.add_option("--out", out_dir, "output directory (DAE_JUMP_OUT overrides)");
    auto* o_seed = app.add_option("--seed", seed, "sampling seed (default 42)");
    auto* o_samples = app.add_option("--samples", samples, "analyze: number of samples (default 200)");
    auto* o_points = app.add_option("--points", points, "simulate/converge: uniform output points (default 201)");
    auto* o_region = app.add_option("--region", region, "analyze: lower and upper bounds lo1,..,lon,hi1,..,hin")->delimiter(',');
    app.add_option("--probe", probes, "analyze: extra sample point v1,v2,... (repeatable)");
    auto* o_reduced = app.add_flag("--reduced-only", reduced_only, "simulate: only the reduced solution");
    auto* o_rtol = app.add_option("--rtol", rtol, "integrator relative tolerance (default 1e-8)");
    auto* o_atol = app.add_option("--atol", atol, "integrator absolute tolerance (default 1e-10)");
    auto* o_max_step = app.add_option("--max-step", max_step, "integrator maximum step (default 0.05)");
    auto* o_mode = app.add_option("--mode", mode, "integrator mode: explicit | implicit | auto");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    RunConfig c;
    if (!config_file.empty()) apply_config_file(config_file, c);
    c.command = command;
    if (o_scenario->count()) c.scenario = scenario;
    if (o_x0->count()) c.initial_point = parse_point(x0_text);
    if (o_eps->count()) c.eps_list = eps;
    if (o_t0->count()) c.t0 = t0;
    if (o_t1->count()) c.t1 = t1;
    if (o_window->count()) c.window_start = window_start;
    if (o_out->count()) c.output_dir = out_dir;
    if (o_seed->count()) c.seed = seed;
    if (o_samples->count()) c.samples = samples;
    if (o_points->count()) c.output_points = points;
    if (o_reduced->count()) c.reduced_only = reduced_only;
    if (o_rtol->count()) c.integrator.rel_tol = rtol;
    if (o_atol->count()) c.integrator.abs_tol = atol;
    if (o_max_step->count()) c.integrator.max_step = max_step;
    if (o_mode->count()) c.integrator.mode = num::integrator_mode_from_string(mode);
    if (o_region->count()) {
        if (region.size() % 2 != 0) throw ConfigError("--region needs an even number of values");
        const Index n = static_cast<Index>(region.size() / 2);
        const Vec all = to_vec(region);
        c.region = std::make_pair(Vec(all.head(n)), Vec(all.tail(n)));
    }
    if (!probes.empty()) {
        c.probes.clear();
        for (const auto& p : probes) c.probes.push_back(parse_point(p));
    }
    if (const char* env = std::getenv("DAE_JUMP_OUT"); env && *env) c.output_dir = env;
    c.validate();
    return c;
}

int cmd_analyze(const RunConfig& c, std::ostream& out) {
    const model::Scenario s = io::load_scenario(c.scenario);
    analysis::SampleRegion region = analysis::SampleRegion::scenario_default(s, c.samples, c.seed);
    if (c.region) {
        region.lower = c.region->first;
        region.upper = c.region->second;
    }
    if (region.lower.size() != s.system.n) throw ConfigError("region dimension does not match the scenario");
    region.include = c.probes;
    const analysis::AnalysisReport r = analysis::analyze(s, region);

    using analysis::to_string;
    std::ostringstream text;
    text << "scenario: " << s.name << "\n"
         << "samples: " << r.samples_used << " (seed " << r.seed << ")\n"
         << "rank E: " << r.rank_E << (r.rank_E_constant ? " (constant)" : " (not constant)") << "\n"
         << "condition (CR): " << to_string(r.cr_verdict) << "\n";
    if (!r.cr_failures.empty())
        text << "  first failing sample: " << point_string(r.cr_failures.front(), 17) << "\n";
    if (!r.cr_detail.empty()) text << "  " << r.cr_detail << "\n";
    text << "index one: " << to_string(r.index1_verdict) << " (min |det A| = " << r.min_abs_det_A
         << ", max cond A = " << r.max_condition_A << ")\n";
    if (!r.index1_failures.empty())
        text << "  first failing sample: " << point_string(r.index1_failures.front(), 17) << "\n";
    text << "ker E involutive: " << to_string(r.involutive_verdict)
         << " (worst bracket residual = " << r.worst_bracket_residual << ")\n";
    if (!r.involutive_failures.empty())
        text << "  first failing sample: " << point_string(r.involutive_failures.front(), 17) << "\n";
    text << "result: " << (r.structural_pass() ? "PASS" : "FAIL") << "\n";

    const auto dir = prepare_output(c);
    write_json(dir / "analysis.json", io::to_json(r));
    write_text(dir / "analysis.txt", text.str());
    out << text.str();
    return r.structural_pass() ? kSuccess : kFailure;
}

int cmd_jump(const RunConfig& c, std::ostream& out) {
    const model::Scenario s = io::load_scenario(c.scenario);
    const Vec x0 = initial_point(c, s);
    const jumps::Method methods[] = {jumps::Method::projector_chart, jumps::Method::projector_fastflow,
                                     jumps::Method::kernel_rule, jumps::Method::nearest_point};
    jumps::FastFlowOptions fastflow;
    fastflow.integrator = c.integrator;

    json results = json::array();
    json freeness = json::array();
    std::ostringstream text;
    text << "scenario: " << s.name << "\n"
         << "x- = " << point_string(x0) << "\n\n"
         << std::left << std::setw(20) << "method" << std::setw(44) << "x+" << std::setw(14) << "|F2(x+)|"
         << "coordinate defect\n";
    for (jumps::Method m : methods) {
        const std::string name = jumps::to_string(m);
        text << std::setw(20) << name;
        try {
            const jumps::JumpResult r = jumps::run_method(s, m, x0, fastflow);
            results.push_back(io::to_json(r));
            std::ostringstream res;
            res.precision(3);
            res << r.constraint_residual;
            text << std::setw(44) << point_string(r.x_plus) << std::setw(14) << res.str();
        } catch (const Error& e) {
            results.push_back(json{{"method", name}, {"error", e.what()}});
            text << "error: " << e.what() << "\n";
            continue;
        }
        if (!s.chart || !s.inwf) {
            freeness.push_back(json{{"method", name}, {"error", "scenario has no normal-form chart"}});
            text << "n/a\n";
            continue;
        }
        try {
            const auto cf = jumps::coordinate_freeness_test(s, m, x0, 1e-6, fastflow);
            freeness.push_back(io::to_json(cf));
            text << cf.defect << (cf.commutes ? " (commutes)" : " (does not commute)") << "\n";
        } catch (const Error& e) {
            freeness.push_back(json{{"method", name}, {"error", e.what()}});
            text << "error: " << e.what() << "\n";
        }
    }
    for (const auto& r : results)
        if (r.contains("diagnostics"))
            for (const auto& d : r["diagnostics"]) text << "note [" << r["method"].get<std::string>() << "]: " << d.get<std::string>() << "\n";

    const json report{{"scenario", s.name},
                      {"x_minus", io::to_json(x0)},
                      {"methods", std::move(results)},
                      {"coordinate_freeness", std::move(freeness)}};
    const auto dir = prepare_output(c);
    write_json(dir / "jump_report.json", report);
    write_text(dir / "jump_report.txt", text.str());
    out << text.str();
    return kSuccess;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
    if (c.eps_list.empty() && !c.reduced_only)
        throw ConfigError("simulate needs at least one epsilon (or --reduced-only)");
    const model::Scenario s = io::load_scenario(c.scenario);
    s.require_chart();
    s.require_inwf();
    const Vec x0 = initial_point(c, s);
    const auto grid = uniform_grid(c.t0, c.t1, c.output_points);
    const auto dir = prepare_output(c);

    json files = json::array();
    json errors = json::array();
    auto emit = [&](const std::string& file, const num::Trajectory& traj, const std::string& error, const json& extra) {
        std::ofstream f(dir / file);
        if (!f) throw Error("cannot write '" + (dir / file).string() + "'");
        io::write_trajectory_csv(f, traj);
        json entry{{"file", file}, {"rows", traj.times.size()}, {"complete", error.empty()}};
        entry.update(extra);
        files.push_back(entry);
        if (!error.empty()) errors.push_back(json{{"file", file}, {"error", error}});
        out << file << ": " << traj.times.size() << " rows" << (error.empty() ? "" : " (partial: " + error + ")") << "\n";
    };

    if (!c.reduced_only) {
        const auto shared = std::make_shared<const model::Scenario>(s);
        for (double eps : c.eps_list) {
            std::string error;
            num::Trajectory traj;
            try {
                const perturb::PerturbedField field(shared, eps);
                traj = integrate_in_chunks(
                    [&](const Vec& x, num::TimeSpan span, const std::vector<double>& outs) {
                        return perturb::integrate_perturbed(field, x, span, c.integrator, outs);
                    },
                    x0, grid, error);
            } catch (const Error& e) {
                error = e.what();
            }
            emit("traj_" + s.name + "_eps" + eps_label(eps) + ".csv", traj, error, json{{"epsilon", eps}});
        }
    }

    std::string error;
    num::Trajectory reduced;
    Vec x_plus;
    try {
        x_plus = jumps::project_consistent_chart(s, x0).x_plus;
        reduced = integrate_in_chunks(
            [&](const Vec& x, num::TimeSpan span, const std::vector<double>& outs) {
                return perturb::integrate_reduced(s, x, span, c.integrator, outs);
            },
            x_plus, grid, error);
    } catch (const Error& e) {
        error = e.what();
    }
    emit("traj_" + s.name + "_reduced.csv", reduced, error, json{{"x_plus", io::to_json(x_plus)}});

    write_json(dir / "simulate_report.json", json{{"scenario", s.name},
                                                   {"x_minus", io::to_json(x0)},
                                                   {"t_span", {c.t0, c.t1}},
                                                   {"files", std::move(files)},
                                                   {"errors", errors}});
    return errors.empty() ? kSuccess : kError;
}

int cmd_converge(const RunConfig& c, std::ostream& out) {
    const model::Scenario s = io::load_scenario(c.scenario);
    const Vec x0 = initial_point(c, s);
    perturb::ConvergenceOptions opt;
    opt.uniform_points = c.output_points;
    const auto r = perturb::convergence_study(s, x0, c.eps_list, c.window_start, c.t1 - c.t0, c.integrator, opt);

    std::ostringstream text;
    text << "scenario: " << s.name << "\n"
         << "x- = " << point_string(x0) << ", x+ = " << point_string(r.x_plus) << "\n"
         << "error window [" << r.t1 << ", " << r.T << "], integration tolerance " << r.integration_tol << "\n\n"
         << std::left << std::setw(12) << "eps" << std::setw(16) << "sup error" << "layer error\n";
    for (const auto& e : r.entries) {
        text << std::setw(12) << e.epsilon;
        if (e.valid)
            text << std::setw(16) << e.sup_error << e.layer_error << "\n";
        else
            text << "error: " << e.error << "\n";
    }
    text << "\nstrictly decreasing: " << (r.decreasing ? "yes" : "no") << "\n"
         << "smallest sup error <= " << r.bound << ": "
         << (r.entries.back().valid && r.sup_errors.back() <= r.bound ? "yes" : "no") << "\n"
         << "layer errors <= 10 x tolerance: " << (r.layer_pass ? "yes" : "no") << "\n"
         << "result: " << (r.pass ? "PASS" : "FAIL") << "\n";

    const auto dir = prepare_output(c);
    write_json(dir / "convergence_report.json", io::to_json(r));
    {
        std::ofstream f(dir / ("convergence_" + s.name + ".csv"));
        if (!f) throw Error("cannot write convergence CSV");
        io::write_convergence_csv(f, r);
    }
    write_text(dir / "convergence_report.txt", text.str());
    out << text.str();
    return r.pass ? kSuccess : kFailure;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig c = parse_arguments(argc, argv);
        if (c.command == "analyze") return cmd_analyze(c, out);
        if (c.command == "jump") return cmd_jump(c, out);
        if (c.command == "simulate") return cmd_simulate(c, out);
        return cmd_converge(c, out);
    } catch (const HelpRequested& h) {
        out << h.text;
        return kSuccess;
    } catch (const std::exception& e) {
        err << "dae-jump: error: " << e.what() << "\n";
        return kError;
    }
}

}  // namespace dae::cli
