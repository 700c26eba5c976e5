#pragma once

#include <optional>
#include <string>

#include "sensmpc/mpc.hpp"

namespace sensmpc {

/// Raised on invalid configuration files; the message names the offending
/// field.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ScenarioConfig {
    std::string scenario;             // uav_default | lq_smoke | licq_dup
    std::vector<Warmstart> modes;
    int N = 0;
    Vector x0;
    int sim_steps = 0;
    double eps = 0.0;
    unsigned long seed = 0;
    std::string out_dir;              // optional; SENSMPC_OUT or ./out otherwise
};

/// Parses and validates a config file against the schema (version 1, unknown
/// fields rejected, x0 checked against the scenario's state dimension).
ScenarioConfig load_config(const std::string& path);

/// A runnable scenario instance.
struct Scenario {
    OcpDefinition ocp;
    PlantModel plant;
    std::vector<std::string> state_series;  // plot series names per state
    std::vector<std::string> input_series;  // plot series names per input
};

Scenario build_scenario(const ScenarioConfig& cfg);

struct ModeSummary {
    std::string mode;
    long total_corrector_iterations = 0;
    double max_constraint_violation = 0.0;
    double max_residual = 0.0;
    double runtime_seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

/// Runs every requested mode on the identical scenario; writes per-mode
/// trajectory, step, and plot CSVs plus a joint summary JSON. Returns 0 on
/// full convergence, 2 when any step aborted.
int run_scenario(const ScenarioConfig& cfg, std::vector<ModeSummary>* summaries = nullptr);

/// Long-format plot CSV (time, series, value) for states, inputs, per-step
/// corrector iterations and runtimes. Throws on an empty log.
void emit_plot_data(const RunResult& result, const Scenario& scenario, double dt,
                    const std::string& path);

/// Validates the config and runs the derivative checks on the scenario OCP;
/// returns the report of the worst block.
DerivativeReport check_scenario(const ScenarioConfig& cfg);

/// Effective output directory: config value, else SENSMPC_OUT, else ./out.
std::string resolve_out_dir(const ScenarioConfig& cfg);

}  // namespace sensmpc
