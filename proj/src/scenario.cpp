#include "sensmpc/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "sensmpc/lq.hpp"
#include "sensmpc/uav.hpp"

namespace sensmpc {

namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const std::set<std::string> kKnownScenarios = {"uav_default", "lq_smoke", "licq_dup"};
const std::set<std::string> kKnownFields = {"schema", "scenario", "modes",   "N",
                                            "x0",     "sim_steps", "eps",    "seed",
                                            "out_dir"};

Eigen::Index scenario_state_dim(const std::string& name) {
    if (name == "lq_smoke") return 2;
    return 12;
}

// Duplicate one row of every stage description that carries it; the
// duplicated row makes the active-constraint gradients linearly dependent
// whenever it is active.
Polyhedron with_duplicate_row(const Polyhedron& set, Eigen::Index row) {
    Matrix gamma(set.rows() + 1, set.dim());
    Vector b(set.rows() + 1);
    gamma.topRows(set.rows()) = set.gamma();
    b.head(set.rows()) = set.b();
    gamma.row(set.rows()) = set.gamma().row(row);
    b[set.rows()] = set.b()[row];
    return Polyhedron(std::move(gamma), std::move(b));
}

Scenario build_uav_scenario(const ScenarioConfig& cfg, bool duplicate_row) {
    UavParams params;
    OcpDefinition ocp = build_uav_ocp(params, cfg.N);
    if (duplicate_row) {
        // The v1 lower bound saturates during the benchmark transient:
        // row 9 of each Z_i (after the 8 input rows), row 1 of X_N.
        std::vector<Polyhedron> z_dup;
        for (const auto& zi : ocp.z_sets) z_dup.push_back(with_duplicate_row(zi, 9));
        ocp = OcpDefinition(ocp.N, ocp.dynamics, ocp.stage_cost, ocp.terminal_cost, ocp.u0_set,
                            std::move(z_dup), with_duplicate_row(ocp.xn_set, 1));
    }
    Scenario scenario{std::move(ocp), nullptr, {}, {}};
    auto dyn = scenario.ocp.dynamics;
    scenario.plant = [dyn](const Vector& x, const Vector& u) { return dyn->eval(x, u); };
    scenario.state_series = {"p1", "p2", "p3", "v1",  "v2",  "v3",
                             "th1", "th2", "th3", "om1", "om2", "om3"};
    scenario.input_series = {"T", "tau1", "tau2", "tau3"};
    return scenario;
}

Scenario build_lq_scenario(const ScenarioConfig& cfg) {
    const double dt = 0.1;
    Matrix A(2, 2), B(2, 1);
    A << 1.0, dt, 0.0, 1.0;
    B << 0.5 * dt * dt, dt;
    Matrix Q = Matrix::Identity(2, 2);
    Matrix R(1, 1);
    R << 0.1;
    Matrix P = solve_dare(A, B, Q, R);
    Vector u_max(1);
    u_max << 1.0;
    OcpDefinition ocp = build_lq_ocp(A, B, Q, R, P, cfg.N, u_max);
    Scenario scenario{std::move(ocp), nullptr, {}, {}};
    auto dyn = scenario.ocp.dynamics;
    scenario.plant = [dyn](const Vector& x, const Vector& u) { return dyn->eval(x, u); };
    scenario.state_series = {"x1", "x2"};
    scenario.input_series = {"u1"};
    return scenario;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\r\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\r\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be an object");

    for (const auto& [key, value] : doc.items())
        if (!kKnownFields.count(key)) throw ConfigError("unknown config field: " + key);

    auto require = [&](const char* field) -> const json& {
        if (!doc.contains(field)) throw ConfigError(std::string("missing config field: ") + field);
        return doc.at(field);
    };

    const auto& schema = require("schema");
    if (!schema.is_number_integer() || schema.get<int>() != 1)
        throw ConfigError("field schema: must be the integer 1");

    ScenarioConfig cfg;
    const auto& scen = require("scenario");
    if (!scen.is_string() || !kKnownScenarios.count(scen.get<std::string>()))
        throw ConfigError("field scenario: expected one of uav_default, lq_smoke, licq_dup");
    cfg.scenario = scen.get<std::string>();

    const auto& modes = require("modes");
    if (!modes.is_array() || modes.empty())
        throw ConfigError("field modes: expected a nonempty array of warmstart modes");
    for (const auto& mode : modes) {
        if (!mode.is_string()) throw ConfigError("field modes: entries must be strings");
        try {
            cfg.modes.push_back(warmstart_from_string(mode.get<std::string>()));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("field modes: ") + e.what());
        }
    }

    const auto& N = require("N");
    if (!N.is_number_integer() || N.get<int>() < 2)
        throw ConfigError("field N: expected an integer >= 2");
    cfg.N = N.get<int>();

    const auto& x0 = require("x0");
    const Eigen::Index want_dim = scenario_state_dim(cfg.scenario);
    if (!x0.is_array() || static_cast<Eigen::Index>(x0.size()) != want_dim)
        throw ConfigError("field x0: expected an array of " + std::to_string(want_dim) +
                          " numbers for scenario " + cfg.scenario);
    cfg.x0.resize(want_dim);
    for (Eigen::Index i = 0; i < want_dim; ++i) {
        const auto& entry = x0.at(static_cast<size_t>(i));
        if (!entry.is_number()) throw ConfigError("field x0: entries must be numbers");
        cfg.x0[i] = entry.get<double>();
    }

    const auto& steps = require("sim_steps");
    if (!steps.is_number_integer() || steps.get<int>() < 1)
        throw ConfigError("field sim_steps: expected an integer >= 1");
    cfg.sim_steps = steps.get<int>();

    const auto& eps = require("eps");
    if (!eps.is_number() || eps.get<double>() <= 0.0)
        throw ConfigError("field eps: expected a positive number");
    cfg.eps = eps.get<double>();

    const auto& seed = require("seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0)
        throw ConfigError("field seed: expected a nonnegative integer");
    cfg.seed = seed.get<unsigned long>();

    if (doc.contains("out_dir")) {
        if (!doc["out_dir"].is_string()) throw ConfigError("field out_dir: expected a string");
        cfg.out_dir = doc["out_dir"].get<std::string>();
    }
    return cfg;
}

Scenario build_scenario(const ScenarioConfig& cfg) {
    if (cfg.scenario == "lq_smoke") return build_lq_scenario(cfg);
    return build_uav_scenario(cfg, cfg.scenario == "licq_dup");
}

std::string resolve_out_dir(const ScenarioConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("SENSMPC_OUT"); env != nullptr && env[0] != '\0') return env;
    return "out";
}

void emit_plot_data(const RunResult& result, const Scenario& scenario, double dt,
                    const std::string& path) {
    if (result.logs.empty()) throw std::runtime_error("emit_plot_data: empty log");
    std::vector<std::vector<std::string>> rows;
    for (size_t k = 0; k < result.logs.size(); ++k) {
        const auto& log = result.logs[k];
        const std::string t = fmt17(static_cast<double>(log.k) * dt);
        const Vector& x = result.states[k];
        for (size_t i = 0; i < scenario.state_series.size(); ++i)
            rows.push_back({t, scenario.state_series[i], fmt17(x[static_cast<Eigen::Index>(i)])});
        for (size_t i = 0; i < scenario.input_series.size(); ++i)
            rows.push_back({t, scenario.input_series[i], fmt17(log.u0[static_cast<Eigen::Index>(i)])});
        rows.push_back({t, "iterations", fmt17(static_cast<double>(log.corrector_iterations))});
        rows.push_back({t, "runtime", fmt17(log.predictor_time + log.corrector_time)});
    }
    write_csv(path, {"time", "series", "value"}, rows);
}

namespace {

void write_trajectory_csv(const RunResult& result, const Scenario& scenario, double dt,
                          const std::string& path) {
    std::vector<std::string> header = {"k", "time"};
    for (const auto& s : scenario.state_series) header.push_back(s);
    for (const auto& s : scenario.input_series) header.push_back(s);
    std::vector<std::vector<std::string>> rows;
    for (size_t k = 0; k < result.states.size(); ++k) {
        std::vector<std::string> row = {std::to_string(k), fmt17(static_cast<double>(k) * dt)};
        for (Eigen::Index i = 0; i < result.states[k].size(); ++i)
            row.push_back(fmt17(result.states[k][i]));
        if (k < result.inputs.size())
            for (Eigen::Index i = 0; i < result.inputs[k].size(); ++i)
                row.push_back(fmt17(result.inputs[k][i]));
        else
            for (size_t i = 0; i < scenario.input_series.size(); ++i) row.push_back("");
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

void write_steps_csv(const RunResult& result, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& log : result.logs) {
        rows.push_back({std::to_string(log.k), std::to_string(log.corrector_iterations),
                        fmt17(log.predictor_time), fmt17(log.corrector_time), fmt17(log.residual),
                        fmt17(log.constraint_violation), log.cold_restarted ? "1" : "0"});
    }
    write_csv(path,
              {"k", "corrector_iterations", "predictor_time", "corrector_time", "residual",
               "constraint_violation", "cold_restarted"},
              rows);
}

}  // namespace

int run_scenario(const ScenarioConfig& cfg, std::vector<ModeSummary>* summaries) {
    const Scenario scenario = build_scenario(cfg);
    const std::string out_dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(out_dir);

    // Sampling interval for time axes: the UAV model's Euler step, or the LQ
    // scenario's 0.1 s grid.
    const double dt = cfg.scenario == "lq_smoke" ? 0.1 : UavParams{}.Ts;

    json summary;
    summary["schema"] = 1;
    summary["scenario"] = cfg.scenario;
    summary["N"] = cfg.N;
    summary["sim_steps"] = cfg.sim_steps;
    summary["eps"] = cfg.eps;
    summary["seed"] = cfg.seed;
    summary["modes"] = json::object();

    int exit_code = 0;
    for (Warmstart mode : cfg.modes) {
        MpcConfig mpc_cfg;
        mpc_cfg.eps = cfg.eps;
        mpc_cfg.warmstart = mode;
        mpc_cfg.sim_steps = cfg.sim_steps;

        const auto t0 = std::chrono::steady_clock::now();
        RunResult result = closed_loop(scenario.ocp, scenario.plant, mpc_cfg, cfg.x0);
        const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        ModeSummary ms;
        ms.mode = to_string(mode);
        ms.total_corrector_iterations = result.total_corrector_iterations();
        ms.max_constraint_violation = result.max_violation();
        ms.max_residual = result.max_residual();
        ms.runtime_seconds = runtime;
        ms.aborted = result.aborted;
        ms.abort_reason = result.abort_reason;
        if (summaries) summaries->push_back(ms);

        const std::string base = out_dir + "/" + cfg.scenario + "_" + ms.mode;
        if (!result.logs.empty()) {
            write_trajectory_csv(result, scenario, dt, base + "_trajectory.csv");
            write_steps_csv(result, base + "_steps.csv");
            emit_plot_data(result, scenario, dt, base + "_plot.csv");
        }

        json mj;
        mj["total_corrector_iterations"] = ms.total_corrector_iterations;
        mj["max_constraint_violation"] = ms.max_constraint_violation;
        mj["max_residual"] = ms.max_residual;
        mj["runtime_seconds"] = ms.runtime_seconds;
        mj["aborted"] = ms.aborted;
        if (ms.aborted) mj["abort_reason"] = ms.abort_reason;
        summary["modes"][ms.mode] = mj;

        std::printf("[%s] %s: iterations=%ld max_violation=%.3e max_residual=%.3e time=%.2fs%s\n",
                    cfg.scenario.c_str(), ms.mode.c_str(), ms.total_corrector_iterations,
                    ms.max_constraint_violation, ms.max_residual, ms.runtime_seconds,
                    ms.aborted ? " ABORTED" : "");
        if (ms.aborted) {
            std::printf("  abort reason: %s\n", ms.abort_reason.c_str());
            exit_code = 2;
        }
    }

    std::ofstream out(out_dir + "/" + cfg.scenario + "_summary.json");
    out << summary.dump(2) << "\n";
    return exit_code;
}

DerivativeReport check_scenario(const ScenarioConfig& cfg) {
    const Scenario scenario = build_scenario(cfg);
    std::mt19937 rng(cfg.seed);
    std::normal_distribution<double> dist(0.0, 0.05);

    // Probe at a perturbed rollout with nonzero costates so every curvature
    // term is exercised.
    const OcpDefinition& ocp = scenario.ocp;
    Vector inputs(static_cast<Eigen::Index>(ocp.N) * ocp.m());
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs[i] = dist(rng);
    PrimalDual z;
    z.v = rollout(ocp, cfg.x0, inputs);
    z.q.resize(ocp.num_eq());
    for (Eigen::Index i = 0; i < z.q.size(); ++i) z.q[i] = dist(rng);
    return check_derivatives(ocp, cfg.x0, z, 1e-5);
}

}  // namespace sensmpc
