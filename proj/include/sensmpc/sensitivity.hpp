#pragma once

#include "sensmpc/ocp.hpp"

namespace sensmpc {

/// One semiderivative predictor step: z(p + dp) ~ z + (dv, dq). Positively
/// homogeneous in dp but in general not linear.
struct SensitivityStep {
    Vector dv;
    Vector dq;
    bool regularized = false;
    double rho = 0.0;
};

/// Thrown when the reduced-Hessian regularity condition fails (directly or
/// through an unresolvable nonconvex predictor QP).
struct RegularityError : std::runtime_error {
    explicit RegularityError(const std::string& what) : std::runtime_error(what) {}
};

struct PredictorConfig {
    double corrector_tol = 1e-5;  // reference-point quality gate: pi <= 10x this
    double qp_tol = 1e-10;
    int qp_max_iter = 200;
    double forced_rho = 0.0;  // > 0 forces Hessian regularization at that weight
};

/// True iff Z'RZ admits a Cholesky factorization with every pivot above tol,
/// Z an orthonormal null-space basis of G from a QR decomposition of G'.
/// Throws if G is rank deficient.
bool regularity_check(const KktData& kkt, double tol);

/// Critical cone of V at the reference solution, for the normal element
/// n = -grad_v L. Rows index into stack_constraints(ocp).
ConeRep critical_cone_V(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z, double tol);

/// R + rho G'G. Requires rho > 0.
Matrix regularize_hessian(const KktData& kkt, double rho);

/// Solves the predictor QP over the critical cone and recovers the costate
/// multipliers (dq = dq* - rho Q dp when the Hessian was regularized).
/// Requires a reference point that solves the VI to corrector tolerance and a
/// passing regularity check.
SensitivityStep predictor_step(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z,
                               const Vector& dp, const PredictorConfig& cfg = {});

/// Natural residual of the sensitivity linear VI over W = K_V x R^d at the
/// given step; verification utility.
double lvi_residual(const OcpDefinition& ocp, const KktData& kkt, const ConeRep& cone,
                    const Vector& dp, const SensitivityStep& step);

}  // namespace sensmpc
