#pragma once

#include "sensmpc/ocp.hpp"

namespace sensmpc {

/// x+ = A x + B u. Zero curvature.
class LinearDynamics : public DynamicsModel {
public:
    LinearDynamics(Matrix A, Matrix B);
    Eigen::Index state_dim() const override { return A_.rows(); }
    Eigen::Index input_dim() const override { return B_.cols(); }
    Vector eval(const Vector& x, const Vector& u) const override { return A_ * x + B_ * u; }
    void jacobians(const Vector&, const Vector&, Matrix& A, Matrix& B) const override {
        A = A_;
        B = B_;
    }
    Matrix costate_hessian(const Vector&, const Vector&, const Vector&) const override {
        return Matrix::Zero(A_.rows() + B_.cols(), A_.rows() + B_.cols());
    }
    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }

private:
    Matrix A_, B_;
};

/// l(x, u) = 1/2 x'Qx + 1/2 u'Ru.
class QuadraticStageCost : public StageCost {
public:
    QuadraticStageCost(Matrix Q, Matrix R);
    double value(const Vector& x, const Vector& u) const override;
    Vector gradient(const Vector& x, const Vector& u) const override;
    Matrix hessian(const Vector& x, const Vector& u) const override;

private:
    Matrix Q_, R_;
};

/// phi(x) = 1/2 x'Px.
class QuadraticTerminalCost : public TerminalCost {
public:
    explicit QuadraticTerminalCost(Matrix P);
    double value(const Vector& x) const override { return 0.5 * x.dot(P_ * x); }
    Vector gradient(const Vector& x) const override { return P_ * x; }
    Matrix hessian(const Vector&) const override { return P_; }

private:
    Matrix P_;
};

/// LQ problem with input bounds u_lo <= u <= u_hi componentwise (infinite
/// entries drop the row). Stage sets carry only the input rows; X_N is free.
OcpDefinition build_lq_ocp(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P, int N, const Vector& u_lo, const Vector& u_hi);

/// Symmetric input box |u| <= u_max.
OcpDefinition build_lq_ocp(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P, int N, const Vector& u_max);

/// Fixed point of the Riccati recursion
/// P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA, iterated from P = Q until
/// ||dP||_inf <= 1e-10. Throws if 1e5 iterations do not converge.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

}  // namespace sensmpc
