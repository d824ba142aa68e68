#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "dae/analysis.hpp"
#include "dae/jumps.hpp"
#include "dae/model.hpp"
#include "dae/ode.hpp"
#include "dae/perturbation.hpp"

namespace dae::io {

using json = nlohmann::json;
using num::Index;
using num::Mat;
using num::Vec;

json to_json(const Vec& v);
json to_json(const Mat& m);  // array of rows
Vec vec_from_json(const json& j);
Mat mat_from_json(const json& j);

json to_json(const analysis::AnalysisReport& r);
json to_json(const jumps::JumpResult& r);
json to_json(const jumps::CoordinateFreenessReport& r);
json to_json(const num::Trajectory& t);
/// Metadata, per-epsilon summaries and the sampled series.
json to_json(const perturb::ConvergenceReport& r);

/// Name, dimension, reference points and, for linear scenarios, the E, H, Q,
/// P matrices. Nonlinear evaluators are not serialized.
json scenario_to_json(const model::Scenario& s);

/// Linear documents are rebuilt from their matrices; otherwise `name` must
/// be a built-in scenario of the stated dimension. Reference points in the
/// document override the built-in ones.
model::Scenario scenario_from_json(const json& j);

/// A built-in name, or a path to a scenario JSON document.
model::Scenario load_scenario(const std::string& name_or_path);

/// 17 significant digits.
std::string format_double(double v);

/// Header `t,x1,...,xn`, one row per output time.
void write_trajectory_csv(std::ostream& os, const num::Trajectory& t);

/// Header `eps,t,x1..xn,ref1..refn,error,layer_deviation`, one row per
/// epsilon and output time.
void write_convergence_csv(std::ostream& os, const perturb::ConvergenceReport& r);

}  // namespace dae::io
