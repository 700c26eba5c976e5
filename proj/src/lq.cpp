#include "sensmpc/lq.hpp"

namespace sensmpc {

LinearDynamics::LinearDynamics(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    if (A_.rows() != A_.cols() || B_.rows() != A_.rows())
        throw std::invalid_argument("LinearDynamics: inconsistent A/B dimensions");
}

QuadraticStageCost::QuadraticStageCost(Matrix Q, Matrix R) : Q_(std::move(Q)), R_(std::move(R)) {
    if (Q_.rows() != Q_.cols() || R_.rows() != R_.cols())
        throw std::invalid_argument("QuadraticStageCost: Q and R must be square");
}

double QuadraticStageCost::value(const Vector& x, const Vector& u) const {
    return 0.5 * x.dot(Q_ * x) + 0.5 * u.dot(R_ * u);
}

Vector QuadraticStageCost::gradient(const Vector& x, const Vector& u) const {
    Vector g(x.size() + u.size());
    g << Q_ * x, R_ * u;
    return g;
}

Matrix QuadraticStageCost::hessian(const Vector& x, const Vector& u) const {
    Matrix H = Matrix::Zero(x.size() + u.size(), x.size() + u.size());
    H.topLeftCorner(x.size(), x.size()) = Q_;
    H.bottomRightCorner(u.size(), u.size()) = R_;
    return H;
}

QuadraticTerminalCost::QuadraticTerminalCost(Matrix P) : P_(std::move(P)) {
    if (P_.rows() != P_.cols()) throw std::invalid_argument("QuadraticTerminalCost: P must be square");
}

OcpDefinition build_lq_ocp(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P, int N, const Vector& u_lo, const Vector& u_hi) {
    const Eigen::Index n = A.rows(), m = B.cols();
    auto dyn = std::make_shared<LinearDynamics>(A, B);
    auto lcost = std::make_shared<QuadraticStageCost>(Q, R);
    auto tcost = std::make_shared<QuadraticTerminalCost>(P);

    Polyhedron u_box = Polyhedron::box(u_lo, u_hi);
    std::vector<Polyhedron> z_sets;
    for (int i = 1; i < N; ++i) {
        // Input rows lifted into the (x, u) stage space.
        Matrix gamma = Matrix::Zero(u_box.rows(), n + m);
        gamma.rightCols(m) = u_box.gamma();
        z_sets.emplace_back(std::move(gamma), u_box.b());
    }
    return OcpDefinition(N, dyn, lcost, tcost, std::move(u_box), std::move(z_sets),
                         Polyhedron::unbounded(n));
}

OcpDefinition build_lq_ocp(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P, int N, const Vector& u_max) {
    return build_lq_ocp(A, B, Q, R, P, N, Vector(-u_max), u_max);
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    Matrix P = Q;
    for (int it = 0; it < 100000; ++it) {
        Matrix BtPA = B.transpose() * P * A;
        Matrix S = R + B.transpose() * P * B;
        Matrix Pnext = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
        Pnext = 0.5 * (Pnext + Pnext.transpose()).eval();
        const double diff = (Pnext - P).lpNorm<Eigen::Infinity>();
        P = std::move(Pnext);
        if (diff <= 1e-10) return P;
    }
    throw std::runtime_error("solve_dare: Riccati recursion did not converge in 1e5 iterations");
}

}  // namespace sensmpc
