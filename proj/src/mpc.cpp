#include "sensmpc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace sensmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Violation of the realized pair (state, input) against the state rows of
// X_N and the input rows of U0; this is what the closed-loop trajectory can
// be checked against without reference to predicted stages.
double realized_violation(const OcpDefinition& ocp, const Vector& x, const Vector& u) {
    double viol = std::max(0.0, ocp.u0_set.violation(u));
    if (ocp.xn_set.rows() > 0) viol = std::max(viol, ocp.xn_set.violation(x));
    return std::max(viol, 0.0);
}

}  // namespace

const char* to_string(Warmstart w) {
    switch (w) {
        case Warmstart::semiderivative: return "semiderivative";
        case Warmstart::shift: return "shift";
        case Warmstart::cold: return "cold";
    }
    return "unknown";
}

Warmstart warmstart_from_string(const std::string& s) {
    if (s == "semiderivative") return Warmstart::semiderivative;
    if (s == "shift") return Warmstart::shift;
    if (s == "cold") return Warmstart::cold;
    throw std::invalid_argument("unknown warmstart mode: " + s);
}

PrimalDual cold_start(const OcpDefinition& ocp, const Vector& p) {
    PrimalDual z;
    z.v = rollout_zero(ocp, p);
    z.q = Vector::Zero(ocp.num_eq());
    return z;
}

PrimalDual shift_warmstart(const OcpDefinition& ocp, const PrimalDual& z_prev) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    PrimalDual z;
    z.v.resize(ocp.num_vars());
    z.q.resize(ocp.num_eq());
    for (int k = 0; k + 1 < ocp.N; ++k) {
        z.v.segment(ocp.u_offset(k), m) = z_prev.v.segment(ocp.u_offset(k + 1), m);
        z.v.segment(ocp.x_offset(k + 1), n) = z_prev.v.segment(ocp.x_offset(k + 2), n);
        z.q.segment(static_cast<Eigen::Index>(k) * n, n) =
            z_prev.q.segment(static_cast<Eigen::Index>(k + 1) * n, n);
    }
    const Vector u_last = z_prev.v.segment(ocp.u_offset(ocp.N - 1), m);
    const Vector x_last = z_prev.v.segment(ocp.x_offset(ocp.N), n);
    z.v.segment(ocp.u_offset(ocp.N - 1), m) = u_last;
    z.v.segment(ocp.x_offset(ocp.N), n) = ocp.dynamics->eval(x_last, u_last);
    z.q.segment(static_cast<Eigen::Index>(ocp.N - 1) * n, n) =
        z_prev.q.segment(static_cast<Eigen::Index>(ocp.N - 1) * n, n);
    return z;
}

MpcStepResult mpc_step(const OcpDefinition& ocp, const MpcConfig& cfg, const Vector& p_k,
                       const Vector& p_prev, const PrimalDual& z_prev) {
    MpcStepResult out;
    out.log.p = p_k;

    PrimalDual z_init;
    const auto t_pred = Clock::now();
    switch (cfg.warmstart) {
        case Warmstart::semiderivative: {
            PredictorConfig pcfg;
            pcfg.corrector_tol = cfg.eps;
            pcfg.forced_rho = cfg.forced_rho;
            SensitivityStep step = predictor_step(ocp, p_prev, z_prev, p_k - p_prev, pcfg);
            z_init.v = z_prev.v + step.dv;
            z_init.q = z_prev.q + step.dq;
            break;
        }
        case Warmstart::shift:
            z_init = shift_warmstart(ocp, z_prev);
            break;
        case Warmstart::cold:
            z_init = cold_start(ocp, p_k);
            break;
    }
    out.log.predictor_time = seconds_since(t_pred);

    CorrectorConfig ccfg;
    ccfg.qp_tol = cfg.qp_tol;
    ccfg.qp_max_iter = cfg.qp_max_iter;
    const auto t_corr = Clock::now();
    CorrectorReport report = correct(ocp, p_k, z_init, cfg.eps, cfg.max_corrector_iter, ccfg);
    if (report.status != CorrectorStatus::converged) {
        out.log.cold_restarted = true;
        report = correct(ocp, p_k, cold_start(ocp, p_k), cfg.eps, cfg.max_corrector_iter, ccfg);
        if (report.status != CorrectorStatus::converged) {
            std::ostringstream msg;
            msg << "mpc_step: corrector failed (" << to_string(report.status)
                << ") even after cold restart, residual " << report.residuals.back();
            throw std::runtime_error(msg.str());
        }
    }
    out.log.corrector_time = seconds_since(t_corr);

    out.z = report.z;
    out.u0 = ocp.u0_set.project(out.z.v.head(ocp.m()));
    out.log.u0 = out.u0;
    out.log.corrector_iterations = report.iterations;
    out.log.residual = report.residuals.back();
    out.log.converged = true;
    const Polyhedron stacked = stack_constraints(ocp);
    out.log.constraint_violation = std::max(0.0, stacked.violation(out.z.v));
    return out;
}

long RunResult::total_corrector_iterations() const {
    long total = 0;
    for (const auto& log : logs) total += log.corrector_iterations;
    return total;
}

double RunResult::max_residual() const {
    double worst = 0.0;
    for (const auto& log : logs) worst = std::max(worst, log.residual);
    return worst;
}

double RunResult::max_violation() const {
    double worst = 0.0;
    for (const auto& log : logs) worst = std::max(worst, log.constraint_violation);
    return worst;
}

RunResult closed_loop(const OcpDefinition& ocp, const PlantModel& plant, const MpcConfig& cfg,
                      const Vector& x0, const NoiseHook& noise) {
    if (cfg.sim_steps < 1) throw std::invalid_argument("closed_loop: sim_steps must be >= 1");
    RunResult result;
    result.states.push_back(x0);

    CorrectorConfig ccfg;
    ccfg.qp_tol = cfg.qp_tol;
    ccfg.qp_max_iter = cfg.qp_max_iter;

    // Initial OCP solved cold before the loop.
    const auto t0 = Clock::now();
    CorrectorReport initial = correct(ocp, x0, cold_start(ocp, x0), cfg.eps,
                                      std::max(cfg.max_corrector_iter, 50), ccfg);
    if (initial.status != CorrectorStatus::converged) {
        result.aborted = true;
        result.abort_reason = std::string("initial cold solve failed: ") + to_string(initial.status);
        return result;
    }
    PrimalDual z = initial.z;
    Vector p = x0;
    {
        StepLog log;
        log.k = 0;
        log.p = x0;
        log.corrector_time = seconds_since(t0);
        log.corrector_iterations = initial.iterations;
        log.residual = initial.residuals.back();
        log.converged = true;
        log.u0 = ocp.u0_set.project(z.v.head(ocp.m()));
        log.constraint_violation =
            std::max(realized_violation(ocp, x0, log.u0),
                     std::max(0.0, stack_constraints(ocp).violation(z.v)));
        result.logs.push_back(log);
        result.inputs.push_back(log.u0);
        Vector next = plant(x0, log.u0);
        if (noise) next += noise(0);
        result.states.push_back(next);
    }

    for (int k = 1; k < cfg.sim_steps; ++k) {
        const Vector p_k = result.states.back();
        MpcStepResult step;
        try {
            step = mpc_step(ocp, cfg, p_k, p, z);
        } catch (const std::exception& e) {
            result.aborted = true;
            std::ostringstream msg;
            msg << "step " << k << ": " << e.what();
            result.abort_reason = msg.str();
            return result;
        }
        step.log.k = k;
        step.log.constraint_violation =
            std::max(step.log.constraint_violation, realized_violation(ocp, p_k, step.u0));
        result.logs.push_back(step.log);
        result.inputs.push_back(step.u0);
        Vector next = plant(p_k, step.u0);
        if (noise) next += noise(k);
        result.states.push_back(next);
        z = step.z;
        p = p_k;
    }
    return result;
}

}  // namespace sensmpc
