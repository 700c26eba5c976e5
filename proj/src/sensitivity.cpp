#include "sensmpc/sensitivity.hpp"

#include <Eigen/QR>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sensmpc/corrector.hpp"

namespace sensmpc {

namespace {

// Cholesky with explicit pivot threshold; returns false on a pivot <= tol.
bool cholesky_pivots_above(const Matrix& S, double tol) {
    const Eigen::Index k = S.rows();
    Matrix L = Matrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        double pivot = S(i, i) - L.row(i).head(i).squaredNorm();
        if (!(pivot > tol)) return false;
        L(i, i) = std::sqrt(pivot);
        for (Eigen::Index r = i + 1; r < k; ++r) {
            double val = S(r, i) - L.row(r).head(i).dot(L.row(i).head(i));
            L(r, i) = val / L(i, i);
        }
    }
    return true;
}

}  // namespace

bool regularity_check(const KktData& kkt, double tol) {
    const Eigen::Index j = kkt.G.cols();
    const Eigen::Index d = kkt.G.rows();
    Eigen::HouseholderQR<Matrix> qr(kkt.G.transpose());
    Matrix Rfac = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const double diag_max = Rfac.diagonal().cwiseAbs().maxCoeff();
    if (Rfac.diagonal().cwiseAbs().minCoeff() <= tol * std::max(1.0, diag_max))
        throw std::runtime_error(
            "regularity_check: G is rank deficient; the stacked dynamics Jacobian "
            "should be structurally surjective");
    if (j == d) return true;  // trivial null space
    Matrix Qfull = qr.householderQ();
    Matrix Z = Qfull.rightCols(j - d);
    Matrix S = Z.transpose() * kkt.R * Z;
    S = 0.5 * (S + S.transpose()).eval();
    return cholesky_pivots_above(S, tol);
}

ConeRep critical_cone_V(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z,
                        double tol) {
    Vector F = eval_F(ocp, p, z);
    Vector normal = -F.head(ocp.num_vars());

    // Drop-one redundancy tests decompose over the product structure of V:
    // each stage factor is examined against its own block of the normal
    // element, and the resulting index sets are lifted to stacked rows.
    ConeRep cone;
    cone.ortho = normal;
    Eigen::Index row_base = 0;
    int stage = 0;
    for (const auto& blk : ocp.stage_blocks()) {
        const Polyhedron& set = *blk.set;
        const Vector xblk = z.v.segment(blk.offset, set.dim());
        const Vector nblk = normal.segment(blk.offset, set.dim());
        IndexSet active = set.active_set(xblk, tol);

        if (!active.empty() || nblk.lpNorm<Eigen::Infinity>() > tol) {
            double span_residual;
            if (active.empty()) {
                span_residual = nblk.lpNorm<Eigen::Infinity>();
            } else {
                Matrix At(set.dim(), static_cast<Eigen::Index>(active.size()));
                for (size_t k = 0; k < active.size(); ++k)
                    At.col(static_cast<Eigen::Index>(k)) = set.gamma().row(active[k]).transpose();
                Vector coeff = At.colPivHouseholderQr().solve(nblk);
                span_residual = (nblk - At * coeff).lpNorm<Eigen::Infinity>();
            }
            if (span_residual > tol * (1.0 + nblk.lpNorm<Eigen::Infinity>()))
                std::fprintf(stderr,
                             "[sensmpc] warning: stage %d normal element off the active-row span "
                             "by %.3e (inexact reference solution?)\n",
                             stage, span_residual);
        }

        for (Eigen::Index i : active) {
            if (set.drop_row(i).normal_cone_contains(xblk, nblk, tol))
                cone.ineq_rows.push_back(row_base + i);
            else
                cone.eq_rows.push_back(row_base + i);
        }
        row_base += set.rows();
        ++stage;
    }
    return cone;
}

Matrix regularize_hessian(const KktData& kkt, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("regularize_hessian: rho must be positive");
    return kkt.R + rho * kkt.G.transpose() * kkt.G;
}

SensitivityStep predictor_step(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z,
                               const Vector& dp, const PredictorConfig& cfg) {
    const Eigen::Index j = ocp.num_vars();
    const Eigen::Index d = ocp.num_eq();
    if (dp.size() != ocp.n()) throw std::invalid_argument("predictor_step: dp dimension mismatch");

    const double pi = natural_residual(ocp, p, z);
    if (pi > 10.0 * cfg.corrector_tol) {
        std::ostringstream msg;
        msg << "predictor_step: reference point does not solve the VI (pi = " << pi << ")";
        throw std::invalid_argument(msg.str());
    }

    KktData kkt = eval_kkt_data(ocp, p, z);
    const Polyhedron stacked = stack_constraints(ocp);
    const double cone_tol = stacked.default_tol();
    if (!regularity_check(kkt, 1e-10))
        throw RegularityError("regularity_violated: reduced Hessian not positive definite");
    ConeRep cone = critical_cone_V(ocp, p, z, cone_tol);

    // Equality rows: the costate block G dv = -Q dp, then the non-redundant
    // active rows, then the stationarity row grad_v L' dv = 0 (dropped when
    // the gradient vanishes, where it is vacuous).
    const bool use_grad_row = kkt.grad_l.lpNorm<Eigen::Infinity>() > cone_tol;
    const Eigen::Index n_eq =
        d + static_cast<Eigen::Index>(cone.eq_rows.size()) + (use_grad_row ? 1 : 0);
    Matrix A_eq(n_eq, j);
    Vector b_eq = Vector::Zero(n_eq);
    A_eq.topRows(d) = kkt.G;
    b_eq.head(d) = -kkt.Q * dp;
    for (size_t k = 0; k < cone.eq_rows.size(); ++k)
        A_eq.row(d + static_cast<Eigen::Index>(k)) = stacked.gamma().row(cone.eq_rows[k]);
    if (use_grad_row) A_eq.row(n_eq - 1) = kkt.grad_l.transpose();

    Matrix A_in(static_cast<Eigen::Index>(cone.ineq_rows.size()), j);
    for (size_t k = 0; k < cone.ineq_rows.size(); ++k)
        A_in.row(static_cast<Eigen::Index>(k)) = stacked.gamma().row(cone.ineq_rows[k]);
    Vector b_in = Vector::Zero(A_in.rows());

    const Vector c = kkt.P * dp;
    const double rho_scale =
        1.0 + kkt.R.lpNorm<Eigen::Infinity>() /
                  std::max(1.0, (kkt.G.transpose() * kkt.G).lpNorm<Eigen::Infinity>());
    std::vector<double> rho_schedule;
    if (cfg.forced_rho > 0.0)
        rho_schedule = {cfg.forced_rho};
    else
        rho_schedule = {0.0, rho_scale, 10.0 * rho_scale, 100.0 * rho_scale};

    QpSolver solver;
    const Vector warm = Vector::Zero(j);
    for (double rho : rho_schedule) {
        Matrix H = rho > 0.0 ? regularize_hessian(kkt, rho) : kkt.R;
        QpProblem qp(std::move(H), c, A_eq, b_eq, A_in, b_in);
        QpSolution sol;
        try {
            sol = solver.solve(qp, QpSettings{cfg.qp_tol, cfg.qp_max_iter}, &warm);
        } catch (const NonconvexQpError&) {
            continue;  // escalate rho
        }
        if (sol.status == QpStatus::infeasible)
            throw std::logic_error(
                "predictor_step: predictor QP infeasible; Q dp should lie in range(G)");
        if (sol.status != QpStatus::optimal) continue;

        SensitivityStep step;
        step.dv = sol.x;
        step.dq = sol.y_eq.head(d);
        if (rho > 0.0) step.dq -= rho * (kkt.Q * dp);
        step.regularized = rho > 0.0;
        step.rho = rho;
        return step;
    }
    throw RegularityError("regularity_violated: predictor QP nonconvex after rho escalation");
}

double lvi_residual(const OcpDefinition& ocp, const KktData& kkt, const ConeRep& cone,
                    const Vector& dp, const SensitivityStep& step) {
    const Eigen::Index j = ocp.num_vars();
    const Polyhedron stacked = stack_constraints(ocp);

    Vector rv = kkt.R * step.dv + kkt.G.transpose() * step.dq + kkt.P * dp;
    Vector target = step.dv - rv;

    // Projection onto the critical cone.
    const bool use_ortho = cone.ortho.size() > 0 && cone.ortho.lpNorm<Eigen::Infinity>() > 0.0;
    const Eigen::Index n_eq = static_cast<Eigen::Index>(cone.eq_rows.size()) + (use_ortho ? 1 : 0);
    Matrix A_eq(n_eq, j);
    for (size_t k = 0; k < cone.eq_rows.size(); ++k)
        A_eq.row(static_cast<Eigen::Index>(k)) = stacked.gamma().row(cone.eq_rows[k]);
    if (use_ortho) A_eq.row(n_eq - 1) = cone.ortho.transpose();
    Matrix A_in(static_cast<Eigen::Index>(cone.ineq_rows.size()), j);
    for (size_t k = 0; k < cone.ineq_rows.size(); ++k)
        A_in.row(static_cast<Eigen::Index>(k)) = stacked.gamma().row(cone.ineq_rows[k]);

    QpProblem qp(Matrix::Identity(j, j), -target, A_eq, Vector::Zero(n_eq), A_in,
                 Vector::Zero(A_in.rows()));
    QpSolution sol = solve_qp(qp, 1e-10, 200);
    if (sol.status != QpStatus::optimal)
        throw std::runtime_error("lvi_residual: cone projection QP failed");

    const double res_v = (step.dv - sol.x).norm();
    const double res_q = (kkt.G * step.dv + kkt.Q * dp).norm();
    return std::sqrt(res_v * res_v + res_q * res_q);
}

}  // namespace sensmpc
