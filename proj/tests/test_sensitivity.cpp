#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sensmpc/corrector.hpp"
#include "sensmpc/lq.hpp"
#include "sensmpc/sensitivity.hpp"
#include "sensmpc/mpc.hpp"
#include "support.hpp"

using namespace sensmpc;
using namespace sensmpc::testing;

namespace {

Matrix scalar(double v) {
    Matrix M(1, 1);
    M << v;
    return M;
}

Vector vec1(double v) {
    Vector x(1);
    x << v;
    return x;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// min 1/2 u0^2 + 1/2 x1^2 s.t. x1 = p + u0, optionally u0 >= -0.3.
OcpDefinition scalar_instance(bool bounded) {
    const double lo = bounded ? -0.3 : -kInf;
    return build_lq_ocp(scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), 1,
                        vec1(lo), vec1(kInf));
}

// Hand-solved reference points of the scalar instance (plus-convention
// costates q = -x1).
PrimalDual scalar_solution(double p, bool bounded) {
    const double u = bounded ? std::max(-p / 2.0, -0.3) : -p / 2.0;
    PrimalDual z;
    z.v.resize(2);
    z.v << u, p + u;
    z.q = vec1(-(p + u));
    return z;
}

}  // namespace

TEST_CASE("regularity check accepts the identity Hessian") {
    KktData kkt;
    kkt.R = Matrix::Identity(3, 3);
    kkt.G = Matrix(1, 3);
    kkt.G << 1.0, 2.0, -1.0;
    CHECK(regularity_check(kkt, 1e-10));
}

TEST_CASE("regularity check on the scalar LQ instance") {
    OcpDefinition ocp = scalar_instance(false);
    KktData kkt = eval_kkt_data(ocp, vec1(1.0), scalar_solution(1.0, false));
    CHECK(regularity_check(kkt, 1e-10));
}

TEST_CASE("regularity check rejects a negative reduced Hessian") {
    KktData kkt;
    kkt.R = Matrix::Zero(2, 2);
    kkt.R.diagonal() << 1.0, -1.0;
    kkt.G = Matrix(1, 2);
    kkt.G << 1.0, 0.0;  // null space = span(e2), Z'RZ = -1
    CHECK_FALSE(regularity_check(kkt, 1e-10));
}

TEST_CASE("regularity check errors on rank-deficient G") {
    KktData kkt;
    kkt.R = Matrix::Identity(2, 2);
    kkt.G = Matrix::Zero(2, 2);
    kkt.G.row(0) << 1.0, 0.0;
    kkt.G.row(1) << 1.0, 0.0;
    CHECK_THROWS_AS(regularity_check(kkt, 1e-10), std::runtime_error);
}

TEST_CASE("critical cone of V: interior stationary point") {
    OcpDefinition ocp = scalar_instance(false);
    ConeRep cone = critical_cone_V(ocp, vec1(1.0), scalar_solution(1.0, false), 1e-8);
    CHECK(cone.ineq_rows.empty());
    CHECK(cone.eq_rows.empty());
}

TEST_CASE("critical cone of V: strictly active bound becomes an equality") {
    OcpDefinition ocp = scalar_instance(true);
    ConeRep cone = critical_cone_V(ocp, vec1(1.0), scalar_solution(1.0, true), 1e-8);
    REQUIRE(cone.eq_rows.size() == 1);
    CHECK(cone.eq_rows[0] == 0);
    CHECK(cone.ineq_rows.empty());
}

TEST_CASE("critical cone of V: weakly active bound stays an inequality") {
    OcpDefinition ocp = scalar_instance(true);
    ConeRep cone = critical_cone_V(ocp, vec1(0.6), scalar_solution(0.6, true), 1e-8);
    REQUIRE(cone.ineq_rows.size() == 1);
    CHECK(cone.ineq_rows[0] == 0);
    CHECK(cone.eq_rows.empty());
}

TEST_CASE("Hessian regularization arithmetic") {
    KktData kkt;
    kkt.R = Matrix::Zero(2, 2);
    kkt.R.diagonal() << 1.0, -1.0;
    kkt.G = Matrix(1, 2);
    kkt.G << 0.0, 1.0;
    Matrix reg = regularize_hessian(kkt, 2.0);
    Matrix expected = Matrix::Zero(2, 2);
    expected.diagonal() << 1.0, 1.0;
    CHECK((reg - expected).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK_THROWS_AS(regularize_hessian(kkt, 0.0), std::invalid_argument);
}

TEST_CASE("large enough rho makes the Hessian positive semidefinite") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index j = 5, d = 2;
        Matrix G(d, j);
        for (Eigen::Index i = 0; i < d; ++i) G.row(i) = random_vec(rng, j).transpose();
        Matrix S(j, j);
        for (Eigen::Index i = 0; i < j; ++i) S.col(i) = random_vec(rng, j);
        Matrix R = 0.5 * (S + S.transpose());
        // Shift on the null space of G until Z'RZ is positive definite.
        Eigen::HouseholderQR<Matrix> qr(G.transpose());
        Matrix Z = Matrix(qr.householderQ()).rightCols(j - d);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(Z.transpose() * R * Z);
        R += (0.5 - std::min(0.0, eig.eigenvalues().minCoeff())) * Z * Z.transpose();

        KktData kkt;
        kkt.R = R;
        kkt.G = G;
        REQUIRE(regularity_check(kkt, 1e-10));
        bool found = false;
        for (double rho : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
            Eigen::SelfAdjointEigenSolver<Matrix> e2(regularize_hessian(kkt, rho));
            if (e2.eigenvalues().minCoeff() >= -1e-10) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("zero parameter change gives a zero step") {
    OcpDefinition ocp = scalar_instance(true);
    SensitivityStep step = predictor_step(ocp, vec1(1.0), scalar_solution(1.0, true), vec1(0.0));
    CHECK(step.dv.lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(step.dq.lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("unconstrained scalar LQ semiderivative by hand") {
    OcpDefinition ocp = scalar_instance(false);
    SensitivityStep step = predictor_step(ocp, vec1(1.0), scalar_solution(1.0, false), vec1(0.2));
    CHECK(step.dv[0] == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(step.dv[1] == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(step.dq[0] == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK_FALSE(step.regularized);
}

TEST_CASE("weakly active bound: one-sided semiderivatives differ") {
    OcpDefinition ocp = scalar_instance(true);
    PrimalDual z = scalar_solution(0.6, true);

    SensitivityStep up = predictor_step(ocp, vec1(0.6), z, vec1(0.2));
    CHECK(std::abs(up.dv[0] - 0.0) <= 1e-9);
    CHECK(std::abs(up.dv[1] - 0.2) <= 1e-9);
    CHECK(std::abs(up.dq[0] - (-0.2)) <= 1e-9);

    SensitivityStep down = predictor_step(ocp, vec1(0.6), z, vec1(-0.2));
    CHECK(std::abs(down.dv[0] - 0.1) <= 1e-9);
    CHECK(std::abs(down.dv[1] - (-0.1)) <= 1e-9);
    CHECK(std::abs(down.dq[0] - 0.1) <= 1e-9);
}

TEST_CASE("positive homogeneity along fixed directions") {
    OcpDefinition ocp = scalar_instance(true);
    PrimalDual z = scalar_solution(0.6, true);
    for (double dir : {1.0, -1.0}) {
        SensitivityStep base = predictor_step(ocp, vec1(0.6), z, vec1(0.2 * dir));
        for (double t : {0.5, 2.0}) {
            SensitivityStep scaled = predictor_step(ocp, vec1(0.6), z, vec1(0.2 * dir * t));
            CHECK((scaled.dv - t * base.dv).lpNorm<Eigen::Infinity>() <= 1e-8);
            CHECK((scaled.dq - t * base.dq).lpNorm<Eigen::Infinity>() <= 1e-8);
        }
    }
}

TEST_CASE("predictor refuses an unsolved reference point") {
    OcpDefinition ocp = scalar_instance(false);
    PrimalDual bad = scalar_solution(1.0, false);
    bad.v[0] += 0.5;
    CHECK_THROWS_AS(predictor_step(ocp, vec1(1.0), bad, vec1(0.1)), std::invalid_argument);
}

TEST_CASE("predictor reports a regularity violation") {
    // Concave control penalty: Z'RZ = 0 on the null space of G at p = 0,
    // where z = 0 is stationary.
    OcpDefinition bad = build_lq_ocp(scalar(1.0), scalar(1.0), scalar(1.0), scalar(-1.0),
                                     scalar(1.0), 1, vec1(-kInf), vec1(kInf));
    PrimalDual z{Vector::Zero(2), Vector::Zero(1)};
    REQUIRE(natural_residual(bad, vec1(0.0), z) <= 1e-12);
    CHECK_THROWS_AS(predictor_step(bad, vec1(0.0), z, vec1(0.1)), RegularityError);
}

TEST_CASE("LQ exactness: the predictor tracks cold solves for small t") {
    const double dt = 0.1;
    Matrix A(2, 2), B(2, 1);
    A << 1.0, dt, 0.0, 1.0;
    B << 0.5 * dt * dt, dt;
    Matrix Q = Matrix::Identity(2, 2);
    Matrix R = scalar(0.1);
    Matrix P = solve_dare(A, B, Q, R);
    OcpDefinition ocp = build_lq_ocp(A, B, Q, R, P, 6, vec1(0.6));

    Vector p0(2);
    p0 << 1.1, 0.1;  // saturates the early controls, leaves the tail free
    CorrectorReport ref = correct(ocp, p0, cold_start(ocp, p0), 1e-11, 50);
    REQUIRE(ref.status == CorrectorStatus::converged);

    std::mt19937 rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        Vector dir = random_vec(rng, 2);
        dir.normalize();
        SensitivityStep step = predictor_step(ocp, p0, ref.z, dir);
        for (double t : {1e-3, 1e-2}) {
            SensitivityStep tstep = predictor_step(ocp, p0, ref.z, Vector(t * dir));
            Vector predicted_v = ref.z.v + tstep.dv;
            Vector predicted_q = ref.z.q + tstep.dq;
            CorrectorReport cold = correct(ocp, Vector(p0 + t * dir), cold_start(ocp, Vector(p0 + t * dir)), 1e-11, 50);
            REQUIRE(cold.status == CorrectorStatus::converged);
            const double err = std::max((cold.z.v - predicted_v).lpNorm<Eigen::Infinity>(),
                                        (cold.z.q - predicted_q).lpNorm<Eigen::Infinity>());
            CHECK(err <= 1e-7);
        }
        (void)step;
    }
}

TEST_CASE("regularization leaves the step unchanged on a convex instance") {
    OcpDefinition ocp = scalar_instance(true);
    PrimalDual z = scalar_solution(1.0, true);
    SensitivityStep plain = predictor_step(ocp, vec1(1.0), z, vec1(0.2));
    PredictorConfig forced;
    forced.forced_rho = 5.0;
    SensitivityStep reg = predictor_step(ocp, vec1(1.0), z, vec1(0.2), forced);
    CHECK(reg.regularized);
    CHECK(reg.rho == doctest::Approx(5.0));
    CHECK((reg.dv - plain.dv).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK((reg.dq - plain.dq).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("duplicated constraint rows do not change the step") {
    // u >= -0.3 stated twice; LICQ fails at the bound.
    Matrix gamma(2, 1);
    gamma << -1.0, -1.0;
    Vector b = Vector::Constant(2, 0.3);
    OcpDefinition base = scalar_instance(true);
    OcpDefinition dup(base.N, base.dynamics, base.stage_cost, base.terminal_cost,
                      Polyhedron(gamma, b), base.z_sets, base.xn_set);

    PrimalDual z = scalar_solution(1.0, true);
    SensitivityStep plain = predictor_step(base, vec1(1.0), z, vec1(0.2));
    SensitivityStep licq_free = predictor_step(dup, vec1(1.0), z, vec1(0.2));
    CHECK((licq_free.dv - plain.dv).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK((licq_free.dq - plain.dq).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("LVI residual certifies the predictor step") {
    OcpDefinition ocp = scalar_instance(true);
    PrimalDual z = scalar_solution(0.6, true);
    KktData kkt = eval_kkt_data(ocp, vec1(0.6), z);
    ConeRep cone = critical_cone_V(ocp, vec1(0.6), z, 1e-8);
    Vector dp = vec1(-0.2);
    SensitivityStep step = predictor_step(ocp, vec1(0.6), z, dp);
    CHECK(lvi_residual(ocp, kkt, cone, dp, step) <= 1e-7);

    SensitivityStep zero{Vector::Zero(2), Vector::Zero(1), false, 0.0};
    CHECK(lvi_residual(ocp, kkt, cone, dp, zero) > 1e-3);

    SensitivityStep bumped = step;
    bumped.dv[0] += 1e-3;
    CHECK(lvi_residual(ocp, kkt, cone, dp, bumped) >= 1e-4);
}
