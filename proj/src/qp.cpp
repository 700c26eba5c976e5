#include "sensmpc/qp.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace sensmpc {

namespace {

constexpr double kStaticReg = 1e-10;

// Largest alpha in (0, 1] with v + alpha*dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
}

// Minimum-norm solve for singular but consistent systems. Returns false when
// the system is actually inconsistent.
bool solve_min_norm(const Matrix& K, const Vector& rhs, Vector& sol) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
    cod.setThreshold(1e-12);
    sol = cod.solve(rhs);
    const double res = (rhs - K * sol).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>() +
                         K.lpNorm<Eigen::Infinity>() * sol.lpNorm<Eigen::Infinity>();
    return sol.allFinite() && res <= 1e-9 * scale;
}

// LU solve of K*sol = rhs with iterative refinement. Returns false when the
// refined residual indicates a (numerically) singular system.
bool solve_refined(const Matrix& K, const Vector& rhs, Vector& sol) {
    Eigen::PartialPivLU<Matrix> lu(K);
    sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;
    for (int pass = 0; pass < 2; ++pass) {
        Vector r = rhs - K * sol;
        sol += lu.solve(r);
    }
    const double res = (rhs - K * sol).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>() +
                         K.lpNorm<Eigen::Infinity>() * sol.lpNorm<Eigen::Infinity>();
    return sol.allFinite() && res <= 1e-10 * scale;
}

}  // namespace

const char* to_string(QpStatus s) {
    switch (s) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::unbounded: return "unbounded";
        case QpStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

QpProblem::QpProblem(Matrix H_, Vector c_, Matrix A_eq_, Vector b_eq_, Matrix A_in_, Vector b_in_)
    : H(std::move(H_)),
      c(std::move(c_)),
      A_eq(std::move(A_eq_)),
      b_eq(std::move(b_eq_)),
      A_in(std::move(A_in_)),
      b_in(std::move(b_in_)) {
    const Eigen::Index n = c.size();
    if (H.rows() != n || H.cols() != n) throw std::invalid_argument("QpProblem: H must be n x n");
    if (A_eq.rows() != b_eq.size()) throw std::invalid_argument("QpProblem: A_eq/b_eq row mismatch");
    if (A_in.rows() != b_in.size()) throw std::invalid_argument("QpProblem: A_in/b_in row mismatch");
    if (A_eq.rows() > 0 && A_eq.cols() != n)
        throw std::invalid_argument("QpProblem: A_eq column mismatch");
    if (A_in.rows() > 0 && A_in.cols() != n)
        throw std::invalid_argument("QpProblem: A_in column mismatch");
    if (A_eq.rows() == 0) A_eq.resize(0, n);
    if (A_in.rows() == 0) A_in.resize(0, n);
    H = 0.5 * (H + H.transpose()).eval();
}

QpProblem::QpProblem(Matrix H_, Vector c_)
    : QpProblem(std::move(H_), std::move(c_), Matrix(0, c_.size()), Vector(0), Matrix(0, c_.size()),
                Vector(0)) {}

double QpSolver::kkt_error(const QpProblem& qp, const Vector& x, const Vector& y_eq,
                           const Vector& y_in) const {
    Vector stat = qp.H * x + qp.c;
    if (qp.num_eq() > 0) stat += qp.A_eq.transpose() * y_eq;
    if (qp.num_in() > 0) stat += qp.A_in.transpose() * y_in;
    double err = stat.lpNorm<Eigen::Infinity>();
    if (qp.num_eq() > 0) err = std::max(err, (qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>());
    if (qp.num_in() > 0) {
        Vector slack = qp.b_in - qp.A_in * x;
        err = std::max(err, std::max(0.0, -slack.minCoeff()));
        err = std::max(err, std::max(0.0, -y_in.minCoeff()));
        err = std::max(err, y_in.cwiseProduct(slack).cwiseAbs().maxCoeff());
    }
    return err;
}

void QpSolver::check_reduced_convexity(const QpProblem& qp) {
    const Eigen::Index n = qp.num_vars();
    Matrix ZtHZ;
    if (qp.num_eq() == 0) {
        ZtHZ = qp.H;
    } else {
        Eigen::ColPivHouseholderQR<Matrix> qr(qp.A_eq.transpose());
        qr.setThreshold(1e-11);
        const Eigen::Index rank = qr.rank();
        if (rank >= n) return;  // no free subspace
        Matrix Qfull = qr.householderQ();
        Matrix Z = Qfull.rightCols(n - rank);
        ZtHZ = Z.transpose() * qp.H * Z;
    }
    Eigen::LDLT<Matrix> ldlt(ZtHZ);
    const double scale = 1.0 + ZtHZ.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-8 * scale)
        throw NonconvexQpError("nonconvex_qp: Hessian indefinite on the null space of A_eq");
}

QpSolution QpSolver::solve_equality_constrained(const QpProblem& qp, const QpSettings& settings) {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index p = qp.num_eq();
    QpSolution sol;
    sol.y_in.resize(0);

    Matrix K(n + p, n + p);
    Vector rhs(n + p);
    K.setZero();
    K.topLeftCorner(n, n) = qp.H;
    if (p > 0) {
        K.topRightCorner(n, p) = qp.A_eq.transpose();
        K.bottomLeftCorner(p, n) = qp.A_eq;
    }
    rhs.head(n) = -qp.c;
    rhs.tail(p) = qp.b_eq;

    Vector z;
    bool regularized = false;
    if (!solve_refined(K, rhs, z)) {
        // Singular KKT: redundant equality rows give consistent singular
        // systems, solved exactly in the minimum-norm sense; otherwise fall
        // back to static regularization.
        if (!solve_min_norm(K, rhs, z)) {
            regularized = true;
            K.topLeftCorner(n, n).diagonal().array() += kStaticReg;
            if (p > 0) K.bottomRightCorner(p, p).diagonal().array() -= kStaticReg;
            if (!solve_refined(K, rhs, z)) {
                K.topLeftCorner(n, n).diagonal().array() += 1e-7;
                if (p > 0) K.bottomRightCorner(p, p).diagonal().array() -= 1e-7;
                solve_refined(K, rhs, z);
            }
        }
    }
    sol.x = z.head(n);
    sol.y_eq = z.tail(p);
    sol.iterations = 1;
    sol.kkt_residual = kkt_error(qp, sol.x, sol.y_eq, sol.y_in);

    const double scale = 1.0 + qp.c.lpNorm<Eigen::Infinity>() +
                         (p > 0 ? qp.b_eq.lpNorm<Eigen::Infinity>() : 0.0);
    if (!sol.x.allFinite() || (regularized && sol.x.lpNorm<Eigen::Infinity>() > 1e6 * scale)) {
        // Singular KKT with a solution escaping to infinity: either an
        // inconsistent equality system or an objective unbounded on it.
        Vector feas_res = p > 0 ? Vector(qp.A_eq * sol.x - qp.b_eq) : Vector::Zero(1);
        sol.status = feas_res.lpNorm<Eigen::Infinity>() > std::sqrt(settings.tol) * scale
                         ? QpStatus::infeasible
                         : QpStatus::unbounded;
        return sol;
    }
    sol.status =
        sol.kkt_residual <= settings.tol * std::max(1.0, scale) ? QpStatus::optimal : QpStatus::max_iter;
    return sol;
}

bool QpSolver::polish(const QpProblem& qp, const QpSettings& settings, QpSolution& sol) {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index p = qp.num_eq();
    const Eigen::Index q = qp.num_in();

    Vector slack = qp.b_in - qp.A_in * sol.x;
    std::vector<bool> active(static_cast<size_t>(q), false);
    for (Eigen::Index i = 0; i < q; ++i) active[static_cast<size_t>(i)] = sol.y_in[i] >= slack[i];

    // Active-set cleanup: solve the equality KKT on the current guess, drop
    // rows with negative multipliers, add violated rows, repeat a few times.
    for (int round = 0; round < 5; ++round) {
        std::vector<Eigen::Index> act;
        for (Eigen::Index i = 0; i < q; ++i)
            if (active[static_cast<size_t>(i)]) act.push_back(i);
        const Eigen::Index a = static_cast<Eigen::Index>(act.size());

        Matrix K = Matrix::Zero(n + p + a, n + p + a);
        Vector rhs(n + p + a);
        K.topLeftCorner(n, n) = qp.H;
        rhs.head(n) = -qp.c;
        if (p > 0) {
            K.block(n, 0, p, n) = qp.A_eq;
            K.block(0, n, n, p) = qp.A_eq.transpose();
            rhs.segment(n, p) = qp.b_eq;
        }
        for (Eigen::Index k = 0; k < a; ++k) {
            K.block(n + p + k, 0, 1, n) = qp.A_in.row(act[k]);
            K.block(0, n + p + k, n, 1) = qp.A_in.row(act[k]).transpose();
            rhs[n + p + k] = qp.b_in[act[k]];
        }

        Vector z;
        if (!solve_refined(K, rhs, z) && !solve_min_norm(K, rhs, z)) {
            K.topLeftCorner(n, n).diagonal().array() += kStaticReg;
            if (p + a > 0) K.bottomRightCorner(p + a, p + a).diagonal().array() -= kStaticReg;
            if (!solve_refined(K, rhs, z)) return false;
        }

        Vector x = z.head(n);
        Vector y_eq = z.segment(n, p);
        Vector y_in = Vector::Zero(q);
        for (Eigen::Index k = 0; k < a; ++k) y_in[act[k]] = z[n + p + k];

        bool changed = false;
        for (Eigen::Index k = 0; k < a; ++k) {
            if (y_in[act[k]] < -0.25 * settings.tol) {
                active[static_cast<size_t>(act[k])] = false;
                changed = true;
            }
        }
        Vector viol = qp.A_in * x - qp.b_in;
        for (Eigen::Index i = 0; i < q; ++i) {
            if (!active[static_cast<size_t>(i)] && viol[i] > 0.25 * settings.tol) {
                active[static_cast<size_t>(i)] = true;
                changed = true;
            }
        }
        if (changed) continue;

        y_in = y_in.cwiseMax(0.0);
        const double err = kkt_error(qp, x, y_eq, y_in);
        if (!std::isfinite(err) || err > std::min(settings.tol, sol.kkt_residual)) return false;
        sol.x = std::move(x);
        sol.y_eq = std::move(y_eq);
        sol.y_in = std::move(y_in);
        sol.kkt_residual = err;
        return true;
    }
    return false;
}

QpSolution QpSolver::solve_interior_point(const QpProblem& qp, const QpSettings& settings,
                                          const Vector* warm) {
    const Eigen::Index n = qp.num_vars();
    const Eigen::Index p = qp.num_eq();
    const Eigen::Index q = qp.num_in();

    // Per-row nonzero support of A_in; box-style rows make the normal-matrix
    // accumulation O(1) per row instead of O(n^2).
    std::vector<std::vector<Eigen::Index>> support(q);
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (qp.A_in(i, j) != 0.0) support[i].push_back(j);

    Vector x = (warm != nullptr && warm->size() == n) ? *warm : Vector::Zero(n);
    Vector y = Vector::Zero(p);
    Vector shat = qp.b_in - qp.A_in * x;
    const double smin = 1.0;
    Vector s = shat.cwiseMax(smin);
    Vector z = Vector::Constant(q, 1.0);

    QpSolution sol;
    sol.x = x;
    sol.y_eq = y;
    sol.y_in = z;

    const double b_scale = 1.0 + std::max(p > 0 ? qp.b_eq.lpNorm<Eigen::Infinity>() : 0.0,
                                          qp.b_in.lpNorm<Eigen::Infinity>());

    Matrix K(n + p, n + p);
    Vector rhs(n + p), step(n + p);
    int it = 0;
    for (; it < settings.max_iter; ++it) {
        Vector r_d = qp.H * x + qp.c + qp.A_in.transpose() * z;
        if (p > 0) r_d += qp.A_eq.transpose() * y;
        Vector r_p = p > 0 ? Vector(qp.A_eq * x - qp.b_eq) : Vector(0);
        Vector r_g = qp.A_in * x + s - qp.b_in;
        const double comp = s.cwiseProduct(z).cwiseAbs().maxCoeff();
        const double mu = s.dot(z) / static_cast<double>(q);

        const double feas = std::max(p > 0 ? r_p.lpNorm<Eigen::Infinity>() : 0.0,
                                     r_g.lpNorm<Eigen::Infinity>());
        const double true_viol = std::max(p > 0 ? r_p.lpNorm<Eigen::Infinity>() : 0.0,
                                          std::max(0.0, (qp.A_in * x - qp.b_in).maxCoeff()));
        sol.x = x;
        sol.y_eq = y;
        sol.y_in = z;
        sol.iterations = it;
        const double prog = std::max({r_d.lpNorm<Eigen::Infinity>(), feas, comp});
        if (prog <= settings.tol) {
            sol.status = QpStatus::optimal;
            sol.kkt_residual = kkt_error(qp, x, y, z);
            polish(qp, settings, sol);
            return sol;
        }
        // Near-optimal iterates can stall on degenerate vertices; an
        // active-set polish usually lands the exact solution from here.
        if (prog <= std::max(1e4 * settings.tol, 1e-6) || (it > 30 && it % 10 == 0)) {
            sol.kkt_residual = kkt_error(qp, x, y, z);
            if (polish(qp, settings, sol)) {
                sol.status = QpStatus::optimal;
                return sol;
            }
        }
        if (true_viol > 1e-6 * b_scale &&
            z.lpNorm<Eigen::Infinity>() + (p > 0 ? y.lpNorm<Eigen::Infinity>() : 0.0) > 1e8) {
            sol.status = QpStatus::infeasible;
            sol.kkt_residual = kkt_error(qp, x, y, z);
            return sol;
        }
        if (x.lpNorm<Eigen::Infinity>() > 1e10 * b_scale * (1.0 + qp.c.lpNorm<Eigen::Infinity>())) {
            sol.status = QpStatus::unbounded;
            sol.kkt_residual = kkt_error(qp, x, y, z);
            return sol;
        }

        // Condensed system in (dx, dy): inequalities eliminated through the
        // barrier weights w = z/s.
        Vector w = z.cwiseQuotient(s);
        Eigen::PartialPivLU<Matrix> lu;
        {
            Vector aux = w.cwiseProduct(r_g) - z;
            rhs.head(n) = -r_d - qp.A_in.transpose() * aux;
            if (p > 0) rhs.tail(p) = -r_p;
        }
        double delta = 0.0;
        bool factored = false;
        for (int attempt = 0; attempt < 4 && !factored; ++attempt) {
            K.setZero();
            K.topLeftCorner(n, n) = qp.H;
            for (Eigen::Index i = 0; i < q; ++i) {
                const double wi = w[i];
                for (Eigen::Index aj : support[i])
                    for (Eigen::Index ak : support[i])
                        K(aj, ak) += wi * qp.A_in(i, aj) * qp.A_in(i, ak);
            }
            if (p > 0) {
                K.topRightCorner(n, p) = qp.A_eq.transpose();
                K.bottomLeftCorner(p, n) = qp.A_eq;
            }
            if (delta > 0.0) {
                K.topLeftCorner(n, n).diagonal().array() += delta;
                if (p > 0) K.bottomRightCorner(p, p).diagonal().array() -= delta;
            }
            lu.compute(K);
            step = lu.solve(rhs);
            step += lu.solve(rhs - K * step);
            const double res = (rhs - K * step).lpNorm<Eigen::Infinity>();
            const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>() +
                                 K.lpNorm<Eigen::Infinity>() * step.lpNorm<Eigen::Infinity>();
            factored = step.allFinite() && res <= 1e-10 * scale;
            if (!factored) delta = delta == 0.0 ? kStaticReg : delta * 1e3;
        }
        if (!factored) {
            sol.status = true_viol > std::sqrt(settings.tol) * b_scale ? QpStatus::infeasible
                                                                       : QpStatus::max_iter;
            sol.kkt_residual = kkt_error(qp, x, y, z);
            return sol;
        }

        Vector dx_aff = step.head(n);
        Vector ds_aff = -r_g - qp.A_in * dx_aff;
        Vector dz_aff = w.cwiseProduct(qp.A_in * dx_aff + r_g) - z;
        const double a_p_aff = max_step(s, ds_aff);
        const double a_d_aff = max_step(z, dz_aff);
        const double mu_aff =
            (s + a_p_aff * ds_aff).dot(z + a_d_aff * dz_aff) / static_cast<double>(q);
        double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3);
        sigma = std::clamp(sigma, 1e-8, 1.0);

        // Mehrotra corrector with second-order complementarity term.
        Vector corr = (ds_aff.cwiseProduct(dz_aff).array() - sigma * mu).matrix();
        Vector aux = w.cwiseProduct(r_g) - z - corr.cwiseQuotient(s);
        rhs.head(n) = -r_d - qp.A_in.transpose() * aux;
        if (p > 0) rhs.tail(p) = -r_p;
        step = lu.solve(rhs);
        step += lu.solve(rhs - K * step);

        Vector dx = step.head(n);
        Vector dy = p > 0 ? Vector(step.tail(p)) : Vector(0);
        Vector ds = -r_g - qp.A_in * dx;
        Vector dz = w.cwiseProduct(qp.A_in * dx + r_g) - z - corr.cwiseQuotient(s);

        const double eta = mu > 1e-5 ? 0.99 : 0.99995;
        const double a_p = std::min(1.0, eta * max_step(s, ds));
        const double a_d = std::min(1.0, eta * max_step(z, dz));
        x += a_p * dx;
        s += a_p * ds;
        if (p > 0) y += a_d * dy;
        z += a_d * dz;
        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) {
            // Restore the last healthy iterate and classify.
            x = sol.x;
            s = (qp.b_in - qp.A_in * x).cwiseMax(1e-12);
            const double viol = std::max(0.0, (qp.A_in * sol.x - qp.b_in).maxCoeff());
            sol.status = viol > std::sqrt(settings.tol) * b_scale ? QpStatus::infeasible
                                                                  : QpStatus::max_iter;
            sol.kkt_residual = kkt_error(qp, sol.x, sol.y_eq, sol.y_in);
            return sol;
        }
    }

    sol.x = x;
    sol.y_eq = y;
    sol.y_in = z;
    sol.iterations = it;
    sol.kkt_residual = kkt_error(qp, x, y, z);
    if (polish(qp, settings, sol)) {
        sol.status = QpStatus::optimal;
        return sol;
    }
    const double feas = std::max(p > 0 ? (qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>() : 0.0,
                                 std::max(0.0, (qp.A_in * x - qp.b_in).maxCoeff()));
    if (feas > std::sqrt(settings.tol) * b_scale)
        sol.status = QpStatus::infeasible;
    else
        sol.status = QpStatus::max_iter;
    return sol;
}

QpSolution QpSolver::solve(const QpProblem& qp, const QpSettings& settings, const Vector* warm) {
    if (settings.tol <= 0.0) throw std::invalid_argument("QpSettings: tol must be positive");
    check_reduced_convexity(qp);
    if (qp.num_in() == 0) return solve_equality_constrained(qp, settings);
    return solve_interior_point(qp, settings, warm);
}

}  // namespace sensmpc
