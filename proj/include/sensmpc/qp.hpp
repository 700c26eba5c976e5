#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sensmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense convex quadratic program
///
///   minimize   1/2 x'Hx + c'x
///   subject to A_eq x  = b_eq
///              A_in x <= b_in
///
/// H is symmetrized on construction. Empty constraint blocks are allowed
/// (0-row matrices with the right column count).
struct QpProblem {
    Matrix H;
    Vector c;
    Matrix A_eq;
    Vector b_eq;
    Matrix A_in;
    Vector b_in;

    QpProblem(Matrix H_, Vector c_, Matrix A_eq_, Vector b_eq_, Matrix A_in_, Vector b_in_);

    /// Unconstrained problem.
    QpProblem(Matrix H_, Vector c_);

    Eigen::Index num_vars() const { return c.size(); }
    Eigen::Index num_eq() const { return A_eq.rows(); }
    Eigen::Index num_in() const { return A_in.rows(); }
};

enum class QpStatus { optimal, infeasible, unbounded, max_iter };

const char* to_string(QpStatus s);

/// Solution with multipliers following the stationarity convention
///   Hx + c + A_eq'y_eq + A_in'y_in = 0,  y_in >= 0.
struct QpSolution {
    Vector x;
    Vector y_eq;
    Vector y_in;
    QpStatus status = QpStatus::max_iter;
    double kkt_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

/// Thrown when the Hessian is indefinite on the null space of A_eq.
struct NonconvexQpError : std::runtime_error {
    explicit NonconvexQpError(const std::string& what) : std::runtime_error(what) {}
};

struct QpSettings {
    double tol = 1e-9;
    int max_iter = 100;
};

/// Primal-dual interior point solver (Mehrotra predictor-corrector) on dense
/// factorizations, with an active-set polish pass for high-accuracy KKT
/// residuals. A solver instance owns mutable workspaces and must not be
/// shared between threads; distinct instances are independent.
class QpSolver {
public:
    QpSolution solve(const QpProblem& qp, const QpSettings& settings = {},
                     const Vector* warm = nullptr);

private:
    QpSolution solve_equality_constrained(const QpProblem& qp, const QpSettings& settings);
    QpSolution solve_interior_point(const QpProblem& qp, const QpSettings& settings,
                                    const Vector* warm);
    void check_reduced_convexity(const QpProblem& qp);
    bool polish(const QpProblem& qp, const QpSettings& settings, QpSolution& sol);
    double kkt_error(const QpProblem& qp, const Vector& x, const Vector& y_eq,
                     const Vector& y_in) const;
};

inline QpSolution solve_qp(const QpProblem& qp, double tol = 1e-9, int max_iter = 100,
                           const Vector* warm = nullptr) {
    QpSolver solver;
    return solver.solve(qp, QpSettings{tol, max_iter}, warm);
}

}  // namespace sensmpc
