#pragma once

#include "sensmpc/ocp.hpp"

namespace sensmpc {

/// Quadrotor benchmark parameters. State x = (position, velocity, attitude,
/// angular rate) in R^12, input u = (thrust T, torques tau) in R^4.
struct UavParams {
    double mass = 2.0;                       // kg
    Eigen::Vector3d inertia{0.0082, 0.0082, 0.0162};  // kg m^2, diagonal
    double gravity = 9.81;                   // m/s^2
    double Ts = 0.075;                       // s, forward Euler step
    double thrust_min = 18.0;                // N
    double thrust_max = 22.0;                // N
    double torque_max = 0.06;                // N m, per axis
    double vel_max = 2.0;                    // m/s, per axis

    double hover_thrust() const { return mass * gravity; }
    Vector input_equilibrium() const;
};

/// Attitude kinematic matrix mapping body rates to attitude rates,
/// theta_dot = K(theta) * omega. Throws near the theta_2 singularity
/// (|cos theta_2| < 1e-6).
Eigen::Matrix3d attitude_matrix(const Eigen::Vector3d& theta);

/// Body-to-world rotation Rz(theta_1) Ry(theta_2) Rx(theta_3); rotates the
/// thrust axis in the translational channel.
Eigen::Matrix3d body_rotation(const Eigen::Vector3d& theta);

/// Continuous-time dynamics xdot = f_c(x, u).
Vector uav_continuous_dynamics(const UavParams& params, const Vector& x, const Vector& u);

/// Forward-Euler discretization x + Ts*f_c(x, u) with analytic Jacobians and
/// costate-Hessian contractions. Takes the physical input (T, tau).
class UavDynamics : public DynamicsModel {
public:
    explicit UavDynamics(UavParams params) : params_(params) {}
    Eigen::Index state_dim() const override { return 12; }
    Eigen::Index input_dim() const override { return 4; }
    Vector eval(const Vector& x, const Vector& u) const override;
    void jacobians(const Vector& x, const Vector& u, Matrix& A, Matrix& B) const override;
    Matrix costate_hessian(const Vector& x, const Vector& u, const Vector& w) const override;
    const UavParams& params() const { return params_; }

private:
    UavParams params_;
};

/// Wraps a dynamics model with a constant input offset: f(x, u + shift).
/// Used to pose problems in deviation coordinates around an equilibrium
/// input.
class InputShiftedDynamics : public DynamicsModel {
public:
    InputShiftedDynamics(std::shared_ptr<const DynamicsModel> inner, Vector shift)
        : inner_(std::move(inner)), shift_(std::move(shift)) {}
    Eigen::Index state_dim() const override { return inner_->state_dim(); }
    Eigen::Index input_dim() const override { return inner_->input_dim(); }
    Vector eval(const Vector& x, const Vector& u) const override {
        return inner_->eval(x, u + shift_);
    }
    void jacobians(const Vector& x, const Vector& u, Matrix& A, Matrix& B) const override {
        inner_->jacobians(x, u + shift_, A, B);
    }
    Matrix costate_hessian(const Vector& x, const Vector& u, const Vector& w) const override {
        return inner_->costate_hessian(x, u + shift_, w);
    }

private:
    std::shared_ptr<const DynamicsModel> inner_;
    Vector shift_;
};

/// Default state/input weights of the benchmark cost.
Matrix uav_state_weights();
Matrix uav_input_weights();

/// LQR terminal weight: Riccati fixed point for the discrete dynamics
/// linearized at the hover equilibrium (x = 0, u = u_eq).
Matrix lqr_terminal(const UavParams& params, const Matrix& Q, const Matrix& R_u);

/// The benchmark OCP in deviation input coordinates u~ = u - u_eq: thrust box
/// shifted by hover thrust, torque and velocity boxes as stated, quadratic
/// cost with the LQR terminal weight. Stage sets carry the input rows first,
/// then the velocity rows.
OcpDefinition build_uav_ocp(const UavParams& params, int N);

}  // namespace sensmpc
