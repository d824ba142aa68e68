#include "dae/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace dae::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json to_json(const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json to_json(const Mat& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i).transpose())));
    return rows;
}

Vec vec_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("expected a numeric array");
    Vec v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("expected a numeric array");
        v[static_cast<Index>(i)] = j[i].get<double>();
    }
    return v;
}

Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty array of rows");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(vec_from_json(j[0]).size());
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Vec row = vec_from_json(j[static_cast<std::size_t>(i)]);
        if (row.size() != cols) throw ConfigError("matrix rows have different lengths");
        m.row(i) = row.transpose();
    }
    return m;
}

namespace {

json points(const std::vector<Vec>& pts) {
    json a = json::array();
    for (const Vec& p : pts) a.push_back(to_json(p));
    return a;
}

json series(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

}  // namespace

json to_json(const analysis::AnalysisReport& r) {
    using analysis::to_string;
    return json{
        {"scenario", r.scenario},
        {"seed", r.seed},
        {"samples_used", r.samples_used},
        {"rank_E", r.rank_E},
        {"rank_E_constant", r.rank_E_constant},
        {"cr", {{"verdict", to_string(r.cr_verdict)}, {"failures", points(r.cr_failures)}, {"detail", r.cr_detail}}},
        {"index1",
         {{"verdict", to_string(r.index1_verdict)},
          {"min_abs_det_A", r.min_abs_det_A},
          {"max_condition_A", r.max_condition_A},
          {"failures", points(r.index1_failures)}}},
        {"involutive",
         {{"verdict", to_string(r.involutive_verdict)},
          {"worst_bracket_residual", r.worst_bracket_residual},
          {"failures", points(r.involutive_failures)}}},
        {"pass", r.structural_pass()},
    };
}

json to_json(const jumps::JumpResult& r) {
    json j{
        {"method", jumps::to_string(r.method)},
        {"x_minus", to_json(r.x_minus)},
        {"x_plus", to_json(r.x_plus)},
        {"constraint_residual", r.constraint_residual},
        {"iterations", r.iterations},
        {"diagnostics", r.diagnostics},
    };
    j["kernel_residual"] = r.kernel_residual ? json(*r.kernel_residual) : json(nullptr);
    j["error_estimate"] = r.error_estimate ? json(*r.error_estimate) : json(nullptr);
    return j;
}

json to_json(const jumps::CoordinateFreenessReport& r) {
    return json{
        {"method", jumps::to_string(r.method)},
        {"x_minus", to_json(r.x_minus)},
        {"x_plus", to_json(r.x_plus)},
        {"psi_of_x_plus", to_json(r.mapped)},
        {"xi_minus", to_json(r.xi_minus)},
        {"xi_plus", to_json(r.xi_plus)},
        {"defect", r.defect},
        {"commutes", r.commutes},
        {"tolerance", r.tolerance},
    };
}

json to_json(const num::Trajectory& t) {
    return json{
        {"mode", num::to_string(t.mode_used)},
        {"accepted_steps", t.accepted_steps},
        {"rejected_steps", t.rejected_steps},
        {"field_evaluations", t.field_evaluations},
        {"times", series(t.times)},
        {"states", points(t.states)},
    };
}

json to_json(const perturb::ConvergenceReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        json je{
            {"epsilon", e.epsilon},
            {"valid", e.valid},
            {"sup_error", e.valid ? json(e.sup_error) : json(nullptr)},
            {"layer_error", e.valid ? json(e.layer_error) : json(nullptr)},
            {"times", series(e.times)},
            {"state_error", series(e.state_error)},
            {"layer_deviation", series(e.layer_deviation)},
        };
        if (!e.error.empty()) je["error"] = e.error;
        entries.push_back(std::move(je));
    }
    auto nullable = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        return a;
    };
    return json{
        {"scenario", r.scenario},
        {"x_minus", to_json(r.x_minus)},
        {"x_plus", to_json(r.x_plus)},
        {"t1", r.t1},
        {"T", r.T},
        {"eps_list", series(r.eps_list)},
        {"sup_errors", nullable(r.sup_errors)},
        {"layer_errors", nullable(r.layer_errors)},
        {"integration_tol", r.integration_tol},
        {"bound", r.bound},
        {"decreasing", r.decreasing},
        {"layer_pass", r.layer_pass},
        {"pass", r.pass},
        {"entries", std::move(entries)},
    };
}

json scenario_to_json(const model::Scenario& s) {
    json refs = json::object();
    for (const auto& [name, p] : s.reference_points) refs[name] = to_json(p);
    json j{{"name", s.name}, {"dimension", s.system.n}, {"reference_points", std::move(refs)}};
    if (s.linear) {
        j["linear"] = json{
            {"E", to_json(s.linear->E)},
            {"H", to_json(s.linear->H)},
            {"Q", to_json(s.linear->Q)},
            {"P", to_json(s.linear->P)},
        };
    }
    return j;
}

model::Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scenario document must be a JSON object");
    if (!j.contains("name") || !j["name"].is_string()) throw ConfigError("scenario document needs a string 'name'");
    const std::string name = j["name"].get<std::string>();

    model::Scenario s;
    if (j.contains("linear")) {
        const json& lin = j["linear"];
        for (const char* key : {"E", "H", "Q", "P"})
            if (!lin.contains(key)) throw ConfigError(std::string("linear scenario is missing matrix '") + key + "'");
        const Mat E = mat_from_json(lin["E"]);
        const Mat H = mat_from_json(lin["H"]);
        model::Decoupling d;
        d.Q = mat_from_json(lin["Q"]);
        d.P = mat_from_json(lin["P"]);
        const Index n = E.rows();
        for (const Mat* m : std::initializer_list<const Mat*>{&E, &H, &d.Q, &d.P})
            if (m->rows() != n || m->cols() != n) throw ConfigError("linear scenario matrices must be square of equal size");
        const Index r = num::numeric_rank(E).rank;
        Eigen::FullPivLU<Mat> p_lu(d.P);
        if (!p_lu.isInvertible()) throw ValidationError("linear scenario: P is singular");
        d.A1 = (d.Q * H * p_lu.inverse()).topLeftCorner(r, r);
        s = model::scenario_linear(E, H, d, name);
    } else {
        s = model::builtin_scenario(name);
    }
    if (j.contains("dimension") && j["dimension"].get<Index>() != s.system.n)
        throw ConfigError("scenario '" + name + "' has dimension " + std::to_string(s.system.n) + ", document says " +
                          std::to_string(j["dimension"].get<Index>()));
    if (j.contains("reference_points")) {
        for (const auto& [key, value] : j["reference_points"].items()) {
            Vec p = vec_from_json(value);
            if (p.size() != s.system.n) throw ConfigError("reference point '" + key + "' has wrong dimension");
            s.reference_points[key] = std::move(p);
        }
    }
    return s;
}

model::Scenario load_scenario(const std::string& name_or_path) {
    const auto names = model::builtin_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end())
        return model::builtin_scenario(name_or_path);
    if (!std::filesystem::exists(name_or_path))
        throw ConfigError("unknown scenario '" + name_or_path + "' (not a built-in name or an existing file)");
    std::ifstream in(name_or_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse scenario file '" + name_or_path + "': " + e.what());
    }
    return scenario_from_json(doc);
}

void write_trajectory_csv(std::ostream& os, const num::Trajectory& t) {
    const Index n = t.states.empty() ? 0 : t.states.front().size();
    os << "t";
    for (Index i = 1; i <= n; ++i) os << ",x" << i;
    os << "\n";
    for (std::size_t k = 0; k < t.times.size(); ++k) {
        os << format_double(t.times[k]);
        for (Index i = 0; i < n; ++i) os << "," << format_double(t.states[k][i]);
        os << "\n";
    }
}

void write_convergence_csv(std::ostream& os, const perturb::ConvergenceReport& r) {
    const Index n = r.x_minus.size();
    os << "eps,t";
    for (Index i = 1; i <= n; ++i) os << ",x" << i;
    for (Index i = 1; i <= n; ++i) os << ",ref" << i;
    os << ",error,layer_deviation\n";
    for (const auto& e : r.entries) {
        for (std::size_t k = 0; k < e.times.size(); ++k) {
            os << format_double(e.epsilon) << "," << format_double(e.times[k]);
            for (Index i = 0; i < n; ++i) os << "," << format_double(e.perturbed[k][i]);
            for (Index i = 0; i < n; ++i) os << "," << format_double(e.reduced[k][i]);
            os << "," << format_double(e.state_error[k]) << "," << format_double(e.layer_deviation[k]) << "\n";
        }
    }
}

}  // namespace dae::io
