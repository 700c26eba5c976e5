#include "sensmpc/uav.hpp"

#include <cmath>

#include "sensmpc/lq.hpp"

namespace sensmpc {

namespace {

constexpr double kGimbalTol = 1e-6;

void check_gimbal(double theta2) {
    if (std::abs(std::cos(theta2)) < kGimbalTol)
        throw std::runtime_error("uav: attitude kinematics singular, |cos(theta_2)| < 1e-6");
}

struct Trig {
    double s1, c1, s2, c2, s3, c3, t2;
    explicit Trig(const Eigen::Vector3d& theta) {
        s1 = std::sin(theta[0]);
        c1 = std::cos(theta[0]);
        s2 = std::sin(theta[1]);
        c2 = std::cos(theta[1]);
        s3 = std::sin(theta[2]);
        c3 = std::cos(theta[2]);
        t2 = s2 / c2;
    }
};

// Thrust axis r(theta) = Rz Ry Rx e3 and its first/second partials.
Eigen::Vector3d thrust_axis(const Trig& t) {
    return {t.c1 * t.s2 * t.c3 + t.s1 * t.s3, t.s1 * t.s2 * t.c3 - t.c1 * t.s3, t.c2 * t.c3};
}

Eigen::Matrix3d thrust_axis_jacobian(const Trig& t) {
    Eigen::Vector3d r = thrust_axis(t);
    Eigen::Matrix3d D;
    D.col(0) << -r[1], r[0], 0.0;
    D.col(1) << t.c1 * t.c2 * t.c3, t.s1 * t.c2 * t.c3, -t.s2 * t.c3;
    D.col(2) << -t.c1 * t.s2 * t.s3 + t.s1 * t.c3, -t.s1 * t.s2 * t.s3 - t.c1 * t.c3, -t.c2 * t.s3;
    return D;
}

// d^2 r / dtheta_i dtheta_j, packed as the 6 distinct vectors.
void thrust_axis_hessian(const Trig& t, Eigen::Vector3d H[3][3]) {
    Eigen::Vector3d r = thrust_axis(t);
    H[0][0] << -r[0], -r[1], 0.0;
    H[0][1] << -t.s1 * t.c2 * t.c3, t.c1 * t.c2 * t.c3, 0.0;
    H[0][2] << t.s1 * t.s2 * t.s3 + t.c1 * t.c3, -t.c1 * t.s2 * t.s3 + t.s1 * t.c3, 0.0;
    H[1][1] << -t.c1 * t.s2 * t.c3, -t.s1 * t.s2 * t.c3, -t.c2 * t.c3;
    H[1][2] << -t.c1 * t.c2 * t.s3, -t.s1 * t.c2 * t.s3, t.s2 * t.s3;
    H[2][2] = -r;
    H[1][0] = H[0][1];
    H[2][0] = H[0][2];
    H[2][1] = H[1][2];
}

Eigen::Matrix3d kinematic_matrix(const Trig& t) {
    Eigen::Matrix3d K;
    K << 1.0, t.s3 * t.t2, t.c3 * t.s2,  //
        0.0, t.c3, -t.s3,                //
        0.0, t.s3 / t.c2, t.c3 / t.c2;
    return K;
}

Eigen::Matrix3d kinematic_matrix_d2(const Trig& t) {
    const double sec2 = 1.0 / (t.c2 * t.c2);
    Eigen::Matrix3d D;
    D << 0.0, t.s3 * sec2, t.c3 * t.c2,  //
        0.0, 0.0, 0.0,                   //
        0.0, t.s3 * t.t2 / t.c2, t.c3 * t.t2 / t.c2;
    return D;
}

Eigen::Matrix3d kinematic_matrix_d3(const Trig& t) {
    Eigen::Matrix3d D;
    D << 0.0, t.c3 * t.t2, -t.s3 * t.s2,  //
        0.0, -t.s3, -t.c3,                //
        0.0, t.c3 / t.c2, -t.s3 / t.c2;
    return D;
}

Eigen::Matrix3d kinematic_matrix_d22(const Trig& t) {
    const double sec2 = 1.0 / (t.c2 * t.c2);
    const double q = (1.0 + t.s2 * t.s2) / (t.c2 * t.c2 * t.c2);
    Eigen::Matrix3d D;
    D << 0.0, 2.0 * t.s3 * t.t2 * sec2, -t.c3 * t.s2,  //
        0.0, 0.0, 0.0,                                 //
        0.0, t.s3 * q, t.c3 * q;
    return D;
}

Eigen::Matrix3d kinematic_matrix_d23(const Trig& t) {
    const double sec2 = 1.0 / (t.c2 * t.c2);
    Eigen::Matrix3d D;
    D << 0.0, t.c3 * sec2, -t.s3 * t.c2,  //
        0.0, 0.0, 0.0,                    //
        0.0, t.c3 * t.t2 / t.c2, -t.s3 * t.t2 / t.c2;
    return D;
}

Eigen::Matrix3d kinematic_matrix_d33(const Trig& t) {
    Eigen::Matrix3d D;
    D << 0.0, -t.s3 * t.t2, -t.c3 * t.s2,  //
        0.0, -t.c3, t.s3,                  //
        0.0, -t.s3 / t.c2, -t.c3 / t.c2;
    return D;
}

}  // namespace

Vector UavParams::input_equilibrium() const {
    Vector u(4);
    u << hover_thrust(), 0.0, 0.0, 0.0;
    return u;
}

Eigen::Matrix3d attitude_matrix(const Eigen::Vector3d& theta) {
    check_gimbal(theta[1]);
    return kinematic_matrix(Trig(theta));
}

Eigen::Matrix3d body_rotation(const Eigen::Vector3d& theta) {
    return (Eigen::AngleAxisd(theta[0], Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(theta[1], Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(theta[2], Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Vector uav_continuous_dynamics(const UavParams& params, const Vector& x, const Vector& u) {
    if (x.size() != 12 || u.size() != 4)
        throw std::invalid_argument("uav_continuous_dynamics: dimension mismatch");
    const Eigen::Vector3d vel = x.segment<3>(3);
    const Eigen::Vector3d theta = x.segment<3>(6);
    const Eigen::Vector3d omega = x.segment<3>(9);
    const double T = u[0];
    const Eigen::Vector3d tau = u.segment<3>(1);
    check_gimbal(theta[1]);

    const Trig t(theta);
    const Eigen::Vector3d J = params.inertia;

    Vector dx(12);
    dx.segment<3>(0) = vel;
    dx.segment<3>(3) =
        (T / params.mass) * thrust_axis(t) - Eigen::Vector3d(0.0, 0.0, params.gravity);
    dx.segment<3>(6) = kinematic_matrix(t) * omega;
    const Eigen::Vector3d gyro(omega[1] * J[2] * omega[2] - omega[2] * J[1] * omega[1],
                               omega[2] * J[0] * omega[0] - omega[0] * J[2] * omega[2],
                               omega[0] * J[1] * omega[1] - omega[1] * J[0] * omega[0]);
    dx.segment<3>(9) = (tau - gyro).cwiseQuotient(J);
    return dx;
}

Vector UavDynamics::eval(const Vector& x, const Vector& u) const {
    return x + params_.Ts * uav_continuous_dynamics(params_, x, u);
}

void UavDynamics::jacobians(const Vector& x, const Vector& u, Matrix& A, Matrix& B) const {
    const Eigen::Vector3d theta = x.segment<3>(6);
    const Eigen::Vector3d omega = x.segment<3>(9);
    const double T = u[0];
    check_gimbal(theta[1]);
    const Trig t(theta);
    const Eigen::Vector3d J = params_.inertia;
    const double Ts = params_.Ts;

    Matrix Ac = Matrix::Zero(12, 12);
    Ac.block<3, 3>(0, 3).setIdentity();
    Ac.block<3, 3>(3, 6) = (T / params_.mass) * thrust_axis_jacobian(t);
    Ac.block<3, 1>(6, 7) = kinematic_matrix_d2(t) * omega;
    Ac.block<3, 1>(6, 8) = kinematic_matrix_d3(t) * omega;
    Ac.block<3, 3>(6, 9) = kinematic_matrix(t);
    // Gyroscopic coupling d/domega of -(omega x J omega)/J.
    Ac(9, 10) = -(J[2] - J[1]) * omega[2] / J[0];
    Ac(9, 11) = -(J[2] - J[1]) * omega[1] / J[0];
    Ac(10, 9) = -(J[0] - J[2]) * omega[2] / J[1];
    Ac(10, 11) = -(J[0] - J[2]) * omega[0] / J[1];
    Ac(11, 9) = -(J[1] - J[0]) * omega[1] / J[2];
    Ac(11, 10) = -(J[1] - J[0]) * omega[0] / J[2];

    Matrix Bc = Matrix::Zero(12, 4);
    Bc.block<3, 1>(3, 0) = thrust_axis(t) / params_.mass;
    Bc.block<3, 3>(9, 1) = J.cwiseInverse().asDiagonal();

    A = Matrix::Identity(12, 12) + Ts * Ac;
    B = Ts * Bc;
}

Matrix UavDynamics::costate_hessian(const Vector& x, const Vector& u, const Vector& w) const {
    const Eigen::Vector3d theta = x.segment<3>(6);
    const Eigen::Vector3d omega = x.segment<3>(9);
    const double T = u[0];
    check_gimbal(theta[1]);
    const Trig t(theta);
    const Eigen::Vector3d J = params_.inertia;
    const Eigen::Vector3d wv = w.segment<3>(3);
    const Eigen::Vector3d wth = w.segment<3>(6);
    const Eigen::Vector3d ww = w.segment<3>(9);

    Matrix H = Matrix::Zero(16, 16);

    Eigen::Vector3d Hr[3][3];
    thrust_axis_hessian(t, Hr);
    const Eigen::Matrix3d Dr = thrust_axis_jacobian(t);
    const Eigen::Matrix3d K2 = kinematic_matrix_d2(t), K3 = kinematic_matrix_d3(t);
    const Eigen::Matrix3d K22 = kinematic_matrix_d22(t), K23 = kinematic_matrix_d23(t),
                          K33 = kinematic_matrix_d33(t);

    // theta-theta: thrust channel plus attitude-rate channel.
    for (int i = 0; i < 3; ++i)
        for (int jj = 0; jj < 3; ++jj) H(6 + i, 6 + jj) = (T / params_.mass) * wv.dot(Hr[i][jj]);
    H(7, 7) += wth.dot(K22 * omega);
    H(7, 8) += wth.dot(K23 * omega);
    H(8, 7) += wth.dot(K23 * omega);
    H(8, 8) += wth.dot(K33 * omega);

    // theta-omega cross from K(theta) omega.
    const Eigen::Vector3d r2 = K2.transpose() * wth;
    const Eigen::Vector3d r3 = K3.transpose() * wth;
    H.block<1, 3>(7, 9) = r2.transpose();
    H.block<1, 3>(8, 9) = r3.transpose();
    H.block<3, 1>(9, 7) = r2;
    H.block<3, 1>(9, 8) = r3;

    // omega-omega from the gyroscopic term.
    const double h23 = -ww[0] * (J[2] - J[1]) / J[0];
    const double h13 = -ww[1] * (J[0] - J[2]) / J[1];
    const double h12 = -ww[2] * (J[1] - J[0]) / J[2];
    H(10, 11) += h23;
    H(11, 10) += h23;
    H(9, 11) += h13;
    H(11, 9) += h13;
    H(9, 10) += h12;
    H(10, 9) += h12;

    // theta-thrust cross (input column 0 lives at index 12).
    for (int i = 0; i < 3; ++i) {
        const double cross = wv.dot(Dr.col(i)) / params_.mass;
        H(6 + i, 12) = cross;
        H(12, 6 + i) = cross;
    }

    return params_.Ts * H;
}

Matrix uav_state_weights() {
    Vector w(12);
    w << 5, 5, 5, 10, 10, 10, 0.1, 0.1, 0.1, 1, 1, 1;
    return w.asDiagonal();
}

Matrix uav_input_weights() {
    Vector w(4);
    w << 0.1, 0.01, 0.01, 0.01;
    return w.asDiagonal();
}

Matrix lqr_terminal(const UavParams& params, const Matrix& Q, const Matrix& R_u) {
    UavDynamics dyn(params);
    Matrix A(12, 12), B(12, 4);
    dyn.jacobians(Vector::Zero(12), params.input_equilibrium(), A, B);
    return solve_dare(A, B, Q, R_u);
}

OcpDefinition build_uav_ocp(const UavParams& params, int N) {
    if (N < 2) throw std::invalid_argument("build_uav_ocp: N must be at least 2");
    auto plain = std::make_shared<UavDynamics>(params);
    auto dyn = std::make_shared<InputShiftedDynamics>(plain, params.input_equilibrium());

    const Matrix Q = uav_state_weights();
    const Matrix R = uav_input_weights();
    const Matrix P = lqr_terminal(params, Q, R);

    auto lcost = std::make_shared<QuadraticStageCost>(Q, R);
    auto tcost = std::make_shared<QuadraticTerminalCost>(P);

    // Deviation thrust box: T in [t_min, t_max] shifted by hover thrust.
    Vector u_lo(4), u_hi(4);
    u_lo << params.thrust_min - params.hover_thrust(), -params.torque_max, -params.torque_max,
        -params.torque_max;
    u_hi << params.thrust_max - params.hover_thrust(), params.torque_max, params.torque_max,
        params.torque_max;
    Polyhedron u0 = Polyhedron::box(u_lo, u_hi);

    // Velocity box rows over the state part: components 3..5.
    Matrix vel_gamma = Matrix::Zero(6, 12);
    Vector vel_b = Vector::Constant(6, params.vel_max);
    for (int a = 0; a < 3; ++a) {
        vel_gamma(2 * a, 3 + a) = 1.0;
        vel_gamma(2 * a + 1, 3 + a) = -1.0;
    }

    // Stage sets over (x, u): input rows first, then the velocity rows.
    std::vector<Polyhedron> z_sets;
    for (int i = 1; i < N; ++i) {
        Matrix gamma = Matrix::Zero(14, 16);
        Vector b(14);
        gamma.block(0, 12, 8, 4) = u0.gamma();
        b.head(8) = u0.b();
        gamma.block(8, 0, 6, 12) = vel_gamma;
        b.tail(6) = vel_b;
        z_sets.emplace_back(std::move(gamma), std::move(b));
    }

    Polyhedron xn(vel_gamma, vel_b);
    return OcpDefinition(N, dyn, lcost, tcost, std::move(u0), std::move(z_sets), std::move(xn));
}

}  // namespace sensmpc
