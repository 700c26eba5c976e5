#pragma once

#include "sensmpc/ocp.hpp"

namespace sensmpc {

enum class CorrectorStatus { converged, max_iter, qp_failure };

const char* to_string(CorrectorStatus s);

struct CorrectorReport {
    PrimalDual z;
    int iterations = 0;
    std::vector<double> residuals;  // pi at the initial point and after each step
    CorrectorStatus status = CorrectorStatus::max_iter;
};

struct CorrectorConfig {
    double qp_tol = 1e-9;
    int qp_max_iter = 200;
};

/// Natural residual pi(p, z) = ||z - Pi_E[z - F(p, z)]|| with E = V x R^d:
/// the v block projects stage-wise onto V, the q block contributes ||g||.
double natural_residual(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z);

/// One Josephy-Newton step: solves the SQP subproblem linearized at z_k and
/// returns the increment (dv, dq). Nonconvex subproblems are retried with the
/// rho-regularized Hessian and the costate multipliers corrected accordingly.
PrimalDual jn_step(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z_k,
                   const CorrectorConfig& cfg = {});

/// Runs jn_step until pi <= eps or max_iter, recording the residual sequence.
CorrectorReport correct(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z0, double eps,
                        int max_iter, const CorrectorConfig& cfg = {});

}  // namespace sensmpc
