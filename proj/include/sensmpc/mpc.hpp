#pragma once

#include <functional>

#include "sensmpc/corrector.hpp"
#include "sensmpc/sensitivity.hpp"

namespace sensmpc {

enum class Warmstart { semiderivative, shift, cold };

const char* to_string(Warmstart w);
Warmstart warmstart_from_string(const std::string& s);

struct MpcConfig {
    double eps = 1e-5;
    int max_corrector_iter = 30;
    Warmstart warmstart = Warmstart::semiderivative;
    double forced_rho = 0.0;
    int sim_steps = 1;
    double qp_tol = 1e-9;
    int qp_max_iter = 200;
};

struct StepLog {
    int k = 0;
    Vector p;
    Vector u0;
    double predictor_time = 0.0;  // seconds
    double corrector_time = 0.0;  // seconds
    int corrector_iterations = 0;
    double residual = 0.0;
    double constraint_violation = 0.0;
    bool converged = false;
    bool cold_restarted = false;
};

struct MpcStepResult {
    PrimalDual z;
    Vector u0;
    StepLog log;
};

/// Cold start: zero-input rollout from p with zero costates.
PrimalDual cold_start(const OcpDefinition& ocp, const Vector& p);

/// One-step shift: stage variables move one step forward; the tail is filled
/// by duplicating the last control, rolling the terminal state through the
/// dynamics, and duplicating the last costate.
PrimalDual shift_warmstart(const OcpDefinition& ocp, const PrimalDual& z_prev);

/// One controller update: warmstart from z_prev per the configured strategy,
/// correct at p_k, extract u0 (projected onto U0). Corrector failure triggers
/// one cold restart; a second failure throws.
MpcStepResult mpc_step(const OcpDefinition& ocp, const MpcConfig& cfg, const Vector& p_k,
                       const Vector& p_prev, const PrimalDual& z_prev);

using PlantModel = std::function<Vector(const Vector& x, const Vector& u)>;
using NoiseHook = std::function<Vector(int k)>;

struct RunResult {
    std::vector<StepLog> logs;
    std::vector<Vector> states;  // sim_steps + 1 entries
    std::vector<Vector> inputs;  // sim_steps entries
    bool aborted = false;
    std::string abort_reason;

    long total_corrector_iterations() const;
    double max_residual() const;
    double max_violation() const;
};

/// Closed-loop simulation: the initial OCP is solved cold before the loop;
/// each subsequent step measures the plant state, runs mpc_step, and applies
/// u0. The optional noise hook adds a disturbance to the plant state after
/// each transition. Aborts are recorded in the result with the partial log.
RunResult closed_loop(const OcpDefinition& ocp, const PlantModel& plant, const MpcConfig& cfg,
                      const Vector& x0, const NoiseHook& noise = nullptr);

}  // namespace sensmpc
