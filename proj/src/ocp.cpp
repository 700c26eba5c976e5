#include "sensmpc/ocp.hpp"

#include <cmath>
#include <sstream>

namespace sensmpc {

OcpDefinition::OcpDefinition(int N_, std::shared_ptr<const DynamicsModel> dyn,
                             std::shared_ptr<const StageCost> lcost,
                             std::shared_ptr<const TerminalCost> tcost, Polyhedron u0,
                             std::vector<Polyhedron> z, Polyhedron xn)
    : N(N_),
      dynamics(std::move(dyn)),
      stage_cost(std::move(lcost)),
      terminal_cost(std::move(tcost)),
      u0_set(std::move(u0)),
      z_sets(std::move(z)),
      xn_set(std::move(xn)) {
    if (N < 1) throw std::invalid_argument("OcpDefinition: N must be at least 1");
    if (!dynamics || !stage_cost || !terminal_cost)
        throw std::invalid_argument("OcpDefinition: missing callbacks");
    const Eigen::Index nn = n(), mm = m();
    if (u0_set.dim() != mm) throw std::invalid_argument("OcpDefinition: U0 must live in R^m");
    if (static_cast<int>(z_sets.size()) != N - 1)
        throw std::invalid_argument("OcpDefinition: need N-1 stage sets Z_i");
    for (const auto& zi : z_sets)
        if (zi.dim() != nn + mm)
            throw std::invalid_argument("OcpDefinition: Z_i must live in R^(n+m)");
    if (xn_set.dim() != nn) throw std::invalid_argument("OcpDefinition: X_N must live in R^n");
}

std::vector<OcpDefinition::StageBlock> OcpDefinition::stage_blocks() const {
    std::vector<StageBlock> blocks;
    blocks.push_back({0, &u0_set});
    for (int i = 1; i < N; ++i) blocks.push_back({x_offset(i), &z_sets[static_cast<size_t>(i - 1)]});
    blocks.push_back({x_offset(N), &xn_set});
    return blocks;
}

Polyhedron stack_constraints(const OcpDefinition& ocp) {
    const auto blocks = ocp.stage_blocks();
    Eigen::Index total_rows = 0;
    for (const auto& blk : blocks) total_rows += blk.set->rows();
    Matrix M = Matrix::Zero(total_rows, ocp.num_vars());
    Vector h(total_rows);
    Eigen::Index row = 0;
    for (const auto& blk : blocks) {
        const Eigen::Index r = blk.set->rows();
        if (r > 0) {
            M.block(row, blk.offset, r, blk.set->dim()) = blk.set->gamma();
            h.segment(row, r) = blk.set->b();
        }
        row += r;
    }
    return Polyhedron(std::move(M), std::move(h));
}

Vector eval_g(const OcpDefinition& ocp, const Vector& p, const Vector& v) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    if (p.size() != n) throw std::invalid_argument("eval_g: parameter dimension mismatch");
    if (v.size() != ocp.num_vars()) throw std::invalid_argument("eval_g: v dimension mismatch");
    Vector g(ocp.num_eq());
    Vector xprev = p;
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = v.segment(ocp.u_offset(i), m);
        Vector xnext = v.segment(ocp.x_offset(i + 1), n);
        g.segment(static_cast<Eigen::Index>(i) * n, n) = xnext - ocp.dynamics->eval(xprev, u);
        xprev = xnext;
    }
    return g;
}

double eval_cost(const OcpDefinition& ocp, const Vector& p, const Vector& v) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    double J = 0.0;
    Vector x = p;
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = v.segment(ocp.u_offset(i), m);
        J += ocp.stage_cost->value(x, u);
        x = v.segment(ocp.x_offset(i + 1), n);
    }
    J += ocp.terminal_cost->value(x);
    return J;
}

namespace {

// grad J stacked over v; the stage-0 x-gradient is dropped (x_0 = p is not a
// decision variable).
Vector eval_grad_J(const OcpDefinition& ocp, const Vector& p, const Vector& v) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    Vector grad = Vector::Zero(ocp.num_vars());
    Vector x = p;
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = v.segment(ocp.u_offset(i), m);
        Vector gl = ocp.stage_cost->gradient(x, u);
        grad.segment(ocp.u_offset(i), m) += gl.tail(m);
        if (i > 0) grad.segment(ocp.x_offset(i), n) += gl.head(n);
        x = v.segment(ocp.x_offset(i + 1), n);
    }
    grad.segment(ocp.x_offset(ocp.N), n) += ocp.terminal_cost->gradient(x);
    return grad;
}

}  // namespace

Vector eval_F(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    const Vector& v = z.v;
    if (z.q.size() != ocp.num_eq()) throw std::invalid_argument("eval_F: costate dimension mismatch");

    Vector gradL = eval_grad_J(ocp, p, v);
    // G'q assembled stage by stage: g_i = x_i - f(x_{i-1}, u_{i-1}).
    Vector x = p;
    Matrix A(n, n), B(n, m);
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = v.segment(ocp.u_offset(i), m);
        Vector qi = z.q.segment(static_cast<Eigen::Index>(i) * n, n);
        ocp.dynamics->jacobians(x, u, A, B);
        gradL.segment(ocp.u_offset(i), m) -= B.transpose() * qi;
        if (i > 0) gradL.segment(ocp.x_offset(i), n) -= A.transpose() * qi;
        gradL.segment(ocp.x_offset(i + 1), n) += qi;
        x = v.segment(ocp.x_offset(i + 1), n);
    }

    Vector F(ocp.num_vars() + ocp.num_eq());
    F.head(ocp.num_vars()) = gradL;
    F.tail(ocp.num_eq()) = eval_g(ocp, p, v);
    return F;
}

KktData eval_kkt_data(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    const Eigen::Index j = ocp.num_vars(), d = ocp.num_eq();
    const Vector& v = z.v;

    KktData kkt;
    kkt.R = Matrix::Zero(j, j);
    kkt.G = Matrix::Zero(d, j);
    kkt.P = Matrix::Zero(j, n);
    kkt.Q = Matrix::Zero(d, n);

    Vector x = p;
    Matrix A(n, n), B(n, m);
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = v.segment(ocp.u_offset(i), m);
        Vector qi = z.q.segment(static_cast<Eigen::Index>(i) * n, n);
        ocp.dynamics->jacobians(x, u, A, B);
        Matrix lh = ocp.stage_cost->hessian(x, u);
        Matrix fh = ocp.dynamics->costate_hessian(x, u, qi);
        // Lagrangian curvature of stage i: Hess l - contraction of q_{i+1}
        // with Hess f (the minus from g = x+ - f).
        Matrix stage = lh - fh;

        if (i == 0) {
            kkt.R.block(ocp.u_offset(0), ocp.u_offset(0), m, m) += stage.bottomRightCorner(m, m);
            // Cross-derivatives with the parameter live in the u_0 block.
            kkt.P.block(ocp.u_offset(0), 0, m, n) += stage.bottomLeftCorner(m, n);
            kkt.Q.topRows(n) = -A;
        } else {
            const Eigen::Index xo = ocp.x_offset(i);
            // (x_i, u_i) are contiguous in v, so the stage Hessian drops in
            // as one block.
            kkt.R.block(xo, xo, n + m, n + m) += stage;
            kkt.G.block(static_cast<Eigen::Index>(i) * n, xo, n, n) = -A;
        }
        kkt.G.block(static_cast<Eigen::Index>(i) * n, ocp.u_offset(i), n, m) = -B;
        kkt.G.block(static_cast<Eigen::Index>(i) * n, ocp.x_offset(i + 1), n, n) =
            Matrix::Identity(n, n);
        x = v.segment(ocp.x_offset(i + 1), n);
    }
    kkt.R.block(ocp.x_offset(ocp.N), ocp.x_offset(ocp.N), n, n) += ocp.terminal_cost->hessian(x);

    Vector F = eval_F(ocp, p, z);
    kkt.grad_l = F.head(j);
    kkt.g = F.tail(d);
    return kkt;
}

Vector rollout(const OcpDefinition& ocp, const Vector& p, const Vector& inputs) {
    const Eigen::Index n = ocp.n(), m = ocp.m();
    if (inputs.size() != static_cast<Eigen::Index>(ocp.N) * m)
        throw std::invalid_argument("rollout: need N*m inputs");
    Vector v(ocp.num_vars());
    Vector x = p;
    for (int i = 0; i < ocp.N; ++i) {
        Vector u = inputs.segment(static_cast<Eigen::Index>(i) * m, m);
        v.segment(ocp.u_offset(i), m) = u;
        x = ocp.dynamics->eval(x, u);
        v.segment(ocp.x_offset(i + 1), n) = x;
    }
    return v;
}

Vector rollout_zero(const OcpDefinition& ocp, const Vector& p) {
    return rollout(ocp, p, Vector::Zero(static_cast<Eigen::Index>(ocp.N) * ocp.m()));
}

Vector project_onto_V(const OcpDefinition& ocp, const Vector& y) {
    Vector out(y.size());
    for (const auto& blk : ocp.stage_blocks()) {
        const Eigen::Index len = blk.set->dim();
        out.segment(blk.offset, len) = blk.set->project(y.segment(blk.offset, len));
    }
    return out;
}

double DerivativeReport::max_error() const {
    double worst = 0.0;
    for (const auto& [key, err] : block_errors) worst = std::max(worst, err);
    return worst;
}

namespace {

double rel_err(const Matrix& approx, const Matrix& exact) {
    return (approx - exact).lpNorm<Eigen::Infinity>() / (1.0 + exact.lpNorm<Eigen::Infinity>());
}

}  // namespace

DerivativeReport check_derivatives(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z,
                                   double h) {
    if (h <= 0.0) throw std::invalid_argument("check_derivatives: h must be positive");
    const Eigen::Index n = ocp.n(), m = ocp.m();
    const Eigen::Index j = ocp.num_vars(), d = ocp.num_eq();
    DerivativeReport report;

    // Probe point for the per-callback checks: the stage-1 block of z (or the
    // parameter itself for N = 1).
    Vector x = ocp.N > 1 ? Vector(z.v.segment(ocp.x_offset(1), n)) : p;
    Vector u = z.v.segment(ocp.u_offset(0), m);

    Matrix A(n, n), B(n, m);
    ocp.dynamics->jacobians(x, u, A, B);
    Matrix J_fd(n, n + m);
    for (Eigen::Index k = 0; k < n + m; ++k) {
        Vector xp = x, xm = x, up = u, um = u;
        if (k < n) {
            xp[k] += h;
            xm[k] -= h;
        } else {
            up[k - n] += h;
            um[k - n] -= h;
        }
        J_fd.col(k) = (ocp.dynamics->eval(xp, up) - ocp.dynamics->eval(xm, um)) / (2.0 * h);
    }
    Matrix J_an(n, n + m);
    J_an << A, B;
    report.block_errors["dynamics_jacobian"] = rel_err(J_fd, J_an);

    // Costate Hessian contraction vs differenced Jacobians of w'f.
    Vector w = Vector::LinSpaced(n, 1.0, 2.0);
    Matrix H_an = ocp.dynamics->costate_hessian(x, u, w);
    Matrix H_fd(n + m, n + m);
    for (Eigen::Index k = 0; k < n + m; ++k) {
        Vector xp = x, xm = x, up = u, um = u;
        if (k < n) {
            xp[k] += h;
            xm[k] -= h;
        } else {
            up[k - n] += h;
            um[k - n] -= h;
        }
        Matrix Ap(n, n), Bp(n, m), Am(n, n), Bm(n, m);
        ocp.dynamics->jacobians(xp, up, Ap, Bp);
        ocp.dynamics->jacobians(xm, um, Am, Bm);
        Vector gp(n + m), gm(n + m);
        gp << Ap.transpose() * w, Bp.transpose() * w;
        gm << Am.transpose() * w, Bm.transpose() * w;
        H_fd.col(k) = (gp - gm) / (2.0 * h);
    }
    report.block_errors["dynamics_costate_hessian"] = rel_err(H_fd, H_an);

    Vector gl_an = ocp.stage_cost->gradient(x, u);
    Vector gl_fd(n + m);
    Matrix hl_fd(n + m, n + m);
    for (Eigen::Index k = 0; k < n + m; ++k) {
        Vector xp = x, xm = x, up = u, um = u;
        if (k < n) {
            xp[k] += h;
            xm[k] -= h;
        } else {
            up[k - n] += h;
            um[k - n] -= h;
        }
        gl_fd[k] = (ocp.stage_cost->value(xp, up) - ocp.stage_cost->value(xm, um)) / (2.0 * h);
        hl_fd.col(k) =
            (ocp.stage_cost->gradient(xp, up) - ocp.stage_cost->gradient(xm, um)) / (2.0 * h);
    }
    report.block_errors["stage_cost_gradient"] = rel_err(gl_fd, gl_an);
    report.block_errors["stage_cost_hessian"] = rel_err(hl_fd, ocp.stage_cost->hessian(x, u));

    Vector gphi_an = ocp.terminal_cost->gradient(x);
    Vector gphi_fd(n);
    Matrix hphi_fd(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        gphi_fd[k] = (ocp.terminal_cost->value(xp) - ocp.terminal_cost->value(xm)) / (2.0 * h);
        hphi_fd.col(k) =
            (ocp.terminal_cost->gradient(xp) - ocp.terminal_cost->gradient(xm)) / (2.0 * h);
    }
    report.block_errors["terminal_cost_gradient"] = rel_err(gphi_fd, gphi_an);
    report.block_errors["terminal_cost_hessian"] = rel_err(hphi_fd, ocp.terminal_cost->hessian(x));

    // KKT matrices against differenced eval_F: columns of [R; G] are
    // d/dv F, columns of [P; Q] are d/dp F.
    KktData kkt = eval_kkt_data(ocp, p, z);
    Matrix RG_fd(j + d, j);
    for (Eigen::Index k = 0; k < j; ++k) {
        PrimalDual zp = z, zm = z;
        zp.v[k] += h;
        zm.v[k] -= h;
        RG_fd.col(k) = (eval_F(ocp, p, zp) - eval_F(ocp, p, zm)) / (2.0 * h);
    }
    report.block_errors["kkt_R"] = rel_err(RG_fd.topRows(j), kkt.R);
    report.block_errors["kkt_G"] = rel_err(RG_fd.bottomRows(d), kkt.G);

    Matrix PQ_fd(j + d, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        PQ_fd.col(k) = (eval_F(ocp, pp, z) - eval_F(ocp, pm, z)) / (2.0 * h);
    }
    report.block_errors["kkt_P"] = rel_err(PQ_fd.topRows(j), kkt.P);
    report.block_errors["kkt_Q"] = rel_err(PQ_fd.bottomRows(d), kkt.Q);

    return report;
}

}  // namespace sensmpc
