#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"

using namespace sensmpc;
using namespace sensmpc::testing;

namespace {

Polyhedron nonpositive_quadrant() {
    // x1 <= 0, x2 <= 0
    Matrix gamma = Matrix::Identity(2, 2);
    return Polyhedron(gamma, Vector::Zero(2));
}

}  // namespace

TEST_CASE("active_set picks boundary rows") {
    Polyhedron P = nonpositive_quadrant();
    Vector x(2);
    x << 0.0, -1.0;
    IndexSet a = P.active_set(x, 1e-8);
    REQUIRE(a.size() == 1);
    CHECK(a[0] == 0);

    x << 0.0, 0.0;
    a = P.active_set(x, 1e-8);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == 0);
    CHECK(a[1] == 1);
}

TEST_CASE("active_set rejects infeasible points naming the worst row") {
    Polyhedron P = nonpositive_quadrant();
    Vector x(2);
    x << 0.5, 1.5;
    CHECK_THROWS_WITH_AS(P.active_set(x, 1e-8), doctest::Contains("row 1"), std::runtime_error);
}

TEST_CASE("projection identity inside the set") {
    Polyhedron P = Polyhedron::box(Vector::Zero(2), Vector::Ones(2));
    Vector y(2);
    y << 0.3, 0.8;
    CHECK((P.project(y) - y).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("box projection clips componentwise") {
    Polyhedron P = Polyhedron::box(Vector::Zero(2), Vector::Ones(2));
    Vector y(2);
    y << 2.0, -1.0;
    Vector proj = P.project(y);
    CHECK(proj[0] == doctest::Approx(1.0));
    CHECK(proj[1] == doctest::Approx(0.0));
}

TEST_CASE("half-space projection matches the closed form") {
    Matrix gamma(1, 2);
    gamma << 1.0, 1.0;
    Polyhedron P(gamma, Vector::Zero(1));
    Vector y(2);
    y << 1.0, 1.0;
    // y - (a'y - b)/||a||^2 a = (0, 0)
    Vector proj = P.project(y);
    CHECK(proj.lpNorm<Eigen::Infinity>() <= 1e-9);

    std::mt19937 rng(3);
    for (int t = 0; t < 10; ++t) {
        Vector w = random_vec(rng, 2);
        Vector expected = w;
        const double viol = gamma.row(0).dot(w);
        if (viol > 0.0) expected -= viol / gamma.row(0).squaredNorm() * gamma.row(0).transpose();
        CHECK((P.project(w) - expected).lpNorm<Eigen::Infinity>() <= 1e-8);
    }
}

TEST_CASE("projection onto an empty set fails") {
    SUBCASE("empty box") {
        Matrix gamma(2, 1);
        gamma << 1.0, -1.0;
        Vector b(2);
        b << -1.0, 0.0;  // x <= -1 and x >= 0
        CHECK_THROWS_AS(Polyhedron(gamma, b).project(Vector::Zero(1)), std::runtime_error);
    }
    SUBCASE("empty general polyhedron") {
        Matrix gamma(3, 2);
        gamma << 1.0, 1.0, -1.0, 0.0, 0.0, -1.0;
        Vector b(3);
        b << -1.0, 0.0, 0.0;
        CHECK_THROWS_AS(Polyhedron(gamma, b).project(Vector::Zero(2)), std::runtime_error);
    }
}

TEST_CASE("projection idempotence and variational characterization") {
    std::mt19937 rng(5);
    for (int t = 0; t < 20; ++t) {
        ConeInstance inst = random_cone_instance(rng);
        Polyhedron P(inst.gamma, inst.b);
        Vector y = random_vec(rng, P.dim(), 2.0);
        Vector proj = P.project(y);
        CHECK((P.project(proj) - proj).lpNorm<Eigen::Infinity>() <= 1e-10);

        // (y - proj)'(w - proj) <= 0 for any w in P; sample w by projection.
        for (int k = 0; k < 50; ++k) {
            Vector w = P.project(random_vec(rng, P.dim(), 2.0));
            CHECK((y - proj).dot(w - proj) <= 1e-8);
        }
    }
}

TEST_CASE("normal cone membership on the unit box") {
    Polyhedron P = Polyhedron::box(Vector::Zero(2), Vector::Ones(2));
    Vector x(2);
    x << 1.0, 0.5;
    Vector n(2);
    n << 1.0, 0.0;
    CHECK(P.normal_cone_contains(x, n, 1e-8));
    n << -1.0, 0.0;
    CHECK_FALSE(P.normal_cone_contains(x, n, 1e-8));
    // Pi((2, 1.5)) = (1, 1) != x
    n << 1.0, 1.0;
    CHECK_FALSE(P.normal_cone_contains(x, n, 1e-8));
}

TEST_CASE("redundant rows per the drop-one membership test") {
    Polyhedron P = nonpositive_quadrant();
    Vector x = Vector::Zero(2);
    Vector n(2);
    n << 1.0, 0.0;
    // n in N_{C_2}(0) = {(t, 0), t >= 0}; n not in N_{C_1}(0) = {(0, t)}.
    IndexSet redundant = P.redundant_constraints(x, n, 1e-8);
    REQUIRE(redundant.size() == 1);
    CHECK(redundant[0] == 1);
}

TEST_CASE("duplicated rows cover each other") {
    Matrix gamma(3, 2);
    gamma << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    Polyhedron P(gamma, Vector::Zero(3));
    Vector x = Vector::Zero(2);
    Vector n(2);
    n << 1.0, 0.0;
    IndexSet redundant = P.redundant_constraints(x, n, 1e-8);
    CHECK(redundant.size() == 3);
}

TEST_CASE("zero normal makes every active row redundant") {
    std::mt19937 rng(9);
    for (int t = 0; t < 5; ++t) {
        ConeInstance inst = random_cone_instance(rng);
        Polyhedron P(inst.gamma, inst.b);
        IndexSet redundant = P.redundant_constraints(inst.x, Vector::Zero(P.dim()), 1e-8);
        IndexSet active = P.active_set(inst.x, 1e-8);
        CHECK(redundant == active);
    }
}

TEST_CASE("critical cone splits rows as in the hand example") {
    Polyhedron P = nonpositive_quadrant();
    Vector x = Vector::Zero(2);
    Vector n(2);
    n << 1.0, 0.0;
    ConeRep cone = P.critical_cone(x, n, 1e-8);
    // K = {y | y1 = 0, y2 <= 0}
    REQUIRE(cone.eq_rows.size() == 1);
    CHECK(cone.eq_rows[0] == 0);
    REQUIRE(cone.ineq_rows.size() == 1);
    CHECK(cone.ineq_rows[0] == 1);

    Vector y(2);
    y << 0.0, -3.0;
    CHECK(cone_contains(cone, P, y, 1e-8));
    y << 0.1, -3.0;
    CHECK_FALSE(cone_contains(cone, P, y, 1e-8));
    y << -0.1, -3.0;
    CHECK_FALSE(cone_contains(cone, P, y, 1e-8));  // y'n != 0
}

TEST_CASE("zero normal gives the tangent cone") {
    Polyhedron P = nonpositive_quadrant();
    ConeRep cone = P.critical_cone(Vector::Zero(2), Vector::Zero(2), 1e-8);
    CHECK(cone.eq_rows.empty());
    CHECK(cone.ineq_rows.size() == 2);
}

TEST_CASE("cone membership survives row duplication") {
    Matrix gamma(2, 2), gamma_dup(3, 2);
    gamma << 1.0, 0.0, 0.0, 1.0;
    gamma_dup << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    Polyhedron P(gamma, Vector::Zero(2));
    Polyhedron Pdup(gamma_dup, Vector::Zero(3));
    Vector x = Vector::Zero(2);
    Vector n(2);
    n << 1.0, 0.0;
    ConeRep cone = P.critical_cone(x, n, 1e-8);
    ConeRep cone_dup = Pdup.critical_cone(x, n, 1e-8);
    std::mt19937 rng(21);
    for (int k = 0; k < 1000; ++k) {
        Vector y = random_vec(rng, 2);
        if (k % 2 == 0) y[0] = 0.0;  // exercise members too
        CHECK(cone_contains(cone, P, y, 1e-8) == cone_contains(cone_dup, Pdup, y, 1e-8));
    }
}

TEST_CASE("cone oracle: ConeRep membership matches the direct definition") {
    std::mt19937 rng(31);
    const double tol = 1e-8;
    int checked = 0;
    for (int t = 0; t < 100; ++t) {
        ConeInstance inst = random_cone_instance(rng);
        Polyhedron P(inst.gamma, inst.b);
        ConeRep cone = P.critical_cone(inst.x, inst.normal, tol);
        for (int k = 0; k < 200; ++k) {
            Vector y = sample_direction(rng, inst, cone, k % 2 == 0);
            // Skip knife-edge draws where a predicate sits on the tolerance
            // boundary.
            bool knife = false;
            for (Eigen::Index i : inst.active) {
                const double v = std::abs(inst.gamma.row(i).dot(y));
                if (v > 0.1 * tol && v < 10.0 * tol) knife = true;
            }
            const double vn = std::abs(inst.normal.dot(y));
            if (vn > 0.1 * tol && vn < 10.0 * tol) knife = true;
            if (knife) continue;
            ++checked;
            CHECK(cone_contains(cone, P, y, tol) == direct_cone_membership(inst, y, tol));
        }
    }
    CHECK(checked > 15000);
}

TEST_CASE("default tolerance scales with the right-hand side") {
    Polyhedron P = Polyhedron::box(Vector::Constant(1, -100.0), Vector::Constant(1, 100.0));
    CHECK(P.default_tol() == doctest::Approx(1e-8 * 101.0));
}
