#include "sensmpc/corrector.hpp"

#include <cmath>

#include "sensmpc/qp.hpp"

namespace sensmpc {

const char* to_string(CorrectorStatus s) {
    switch (s) {
        case CorrectorStatus::converged: return "converged";
        case CorrectorStatus::max_iter: return "max_iter";
        case CorrectorStatus::qp_failure: return "qp_failure";
    }
    return "unknown";
}

double natural_residual(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z) {
    Vector F = eval_F(ocp, p, z);
    Vector Fv = F.head(ocp.num_vars());
    Vector g = F.tail(ocp.num_eq());
    Vector proj = project_onto_V(ocp, z.v - Fv);
    const double res_v = (z.v - proj).squaredNorm();
    return std::sqrt(res_v + g.squaredNorm());
}

PrimalDual jn_step(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z_k,
                   const CorrectorConfig& cfg) {
    const Eigen::Index d = ocp.num_eq();

    KktData kkt = eval_kkt_data(ocp, p, z_k);
    const Polyhedron stacked = stack_constraints(ocp);
    const Vector b_in = stacked.b() - stacked.gamma() * z_k.v;

    const double rho_scale =
        1.0 + kkt.R.lpNorm<Eigen::Infinity>() /
                  std::max(1.0, (kkt.G.transpose() * kkt.G).lpNorm<Eigen::Infinity>());

    QpSolver solver;
    std::string last_failure = "nonconvex subproblem";
    for (double rho : {0.0, rho_scale, 10.0 * rho_scale, 100.0 * rho_scale}) {
        Matrix H = rho > 0.0 ? Matrix(kkt.R + rho * kkt.G.transpose() * kkt.G) : kkt.R;
        QpProblem qp(std::move(H), kkt.grad_l, kkt.G, -kkt.g, stacked.gamma(), b_in);
        QpSolution sol;
        try {
            sol = solver.solve(qp, QpSettings{cfg.qp_tol, cfg.qp_max_iter});
        } catch (const NonconvexQpError&) {
            continue;
        }
        if (sol.status != QpStatus::optimal) {
            last_failure = to_string(sol.status);
            if (sol.status == QpStatus::infeasible) break;  // rho does not change feasibility
            continue;
        }
        PrimalDual step;
        step.v = sol.x;
        step.q = sol.y_eq.head(d);
        // Hessian regularization shifts the costate multipliers by rho*g.
        if (rho > 0.0) step.q -= rho * kkt.g;
        return step;
    }
    throw std::runtime_error(std::string("jn_step: subproblem failed (") + last_failure + ")");
}

CorrectorReport correct(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z0, double eps,
                        int max_iter, const CorrectorConfig& cfg) {
    if (eps <= 0.0) throw std::invalid_argument("correct: eps must be positive");
    CorrectorReport report;
    report.z = z0;
    report.residuals.push_back(natural_residual(ocp, p, report.z));

    while (report.residuals.back() > eps) {
        if (!std::isfinite(report.residuals.back())) {
            report.status = CorrectorStatus::qp_failure;
            return report;
        }
        if (report.iterations >= max_iter) {
            report.status = CorrectorStatus::max_iter;
            return report;
        }
        PrimalDual step;
        try {
            step = jn_step(ocp, p, report.z, cfg);
        } catch (const std::runtime_error&) {
            report.status = CorrectorStatus::qp_failure;
            return report;
        }
        report.z.v += step.v;
        report.z.q += step.q;
        ++report.iterations;
        report.residuals.push_back(natural_residual(ocp, p, report.z));
    }
    report.status = CorrectorStatus::converged;
    return report;
}

}  // namespace sensmpc
