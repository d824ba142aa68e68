#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dae/numkit.hpp"
#include "dae/ode.hpp"

namespace dae::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kSuccess = 0, kError = 1, kFailure = 2 };

struct RunConfig {
    std::string command;   // analyze | jump | simulate | converge
    std::string scenario;  // built-in name or path to a scenario JSON document
    std::optional<num::Vec> initial_point;
    std::vector<double> eps_list{1e-1, 1e-2, 1e-3};
    double t0 = 0.0;
    double t1 = 1.0;
    /// converge: start of the sup-error window, relative to t0.
    double window_start = 0.05;
    num::IntegratorConfig integrator{};
    std::filesystem::path output_dir = ".";
    std::uint64_t seed = 42;
    int samples = 200;
    int output_points = 201;
    bool reduced_only = false;
    std::optional<std::pair<num::Vec, num::Vec>> region;
    std::vector<num::Vec> probes;

    void validate() const;
};

/// Thrown by parse_arguments for --help; carries the usage text.
struct HelpRequested {
    std::string text;
};

/// Parses argv (and an optional --config JSON file; flags override file
/// values). The DAE_JUMP_OUT environment variable overrides the output
/// directory. Throws ConfigError on invalid input.
RunConfig parse_arguments(int argc, const char* const* argv);

int cmd_analyze(const RunConfig& config, std::ostream& out);
int cmd_jump(const RunConfig& config, std::ostream& out);
int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_converge(const RunConfig& config, std::ostream& out);

/// Entry point of the dae-jump executable; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dae::cli
