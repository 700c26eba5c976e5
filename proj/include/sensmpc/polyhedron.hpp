#pragma once

#include <limits>
#include <vector>

#include "sensmpc/qp.hpp"

namespace sensmpc {

using IndexSet = std::vector<Eigen::Index>;

/// A critical cone in row form over some polyhedron {x | Gamma x <= b}:
///
///   y in K  <=>  Gamma_i y <= 0 (i in ineq_rows),
///                Gamma_i y  = 0 (i in eq_rows),
///                ortho'y    = 0.
///
/// ineq_rows holds the redundant active rows, eq_rows the remaining active
/// rows, ortho the normal element the cone was built for.
struct ConeRep {
    IndexSet ineq_rows;
    IndexSet eq_rows;
    Vector ortho;
};

/// Convex polyhedron {x | Gamma x <= b}. Immutable after construction; all
/// operations are pure. Emptiness is allowed and flagged by operations that
/// need a feasible point.
///
/// When every row touches a single coordinate the set is a box and
/// projections reduce to componentwise clipping; this is detected on
/// construction.
class Polyhedron {
public:
    Polyhedron(Matrix gamma, Vector b);

    /// Whole space (no rows).
    static Polyhedron unbounded(Eigen::Index dim);

    /// Box lo <= x <= hi. Rows come in (upper, lower) pairs per component;
    /// infinite bounds contribute no row.
    static Polyhedron box(const Vector& lo, const Vector& hi);

    Eigen::Index dim() const { return gamma_.cols(); }
    Eigen::Index rows() const { return gamma_.rows(); }
    const Matrix& gamma() const { return gamma_; }
    const Vector& b() const { return b_; }

    /// max_i (Gamma_i x - b_i); -inf for a row-free set.
    double violation(const Vector& x) const;
    bool contains(const Vector& x, double tol) const { return violation(x) <= tol; }

    /// Active rows {i | Gamma_i x >= b_i - tol}. Throws if x violates some
    /// row by more than tol, naming the worst row.
    IndexSet active_set(const Vector& x, double tol) const;

    /// Euclidean projection argmin ||x - y||^2 over the set. Throws when the
    /// set is empty.
    Vector project(const Vector& y) const;

    /// Tests n in N_P(x) via ||proj(x + n) - x||_inf <= tol. Requires x in P
    /// within tol.
    bool normal_cone_contains(const Vector& x, const Vector& n, double tol) const;

    /// Copy of the set without row i.
    Polyhedron drop_row(Eigen::Index i) const;

    /// Redundant active rows: {i in A(x) | n in N_{C_i}(x)} with C_i the set
    /// without row i, each membership decided by normal_cone_contains.
    IndexSet redundant_constraints(const Vector& x, const Vector& n, double tol) const;

    /// Critical cone at x for normal element n: redundant rows stay
    /// inequalities, the rest of A(x) become equalities, plus n'y = 0.
    ConeRep critical_cone(const Vector& x, const Vector& n, double tol) const;

    /// Active-set tolerance policy: 1e-8 relative to 1 + ||b||_inf.
    double default_tol() const;

private:
    Matrix gamma_;
    Vector b_;
    // Box fast path
    bool is_box_ = false;
    bool box_empty_ = false;
    Vector lb_, ub_;
};

/// ConeRep membership y in K with all comparisons at absolute tolerance tol.
bool cone_contains(const ConeRep& cone, const Polyhedron& P, const Vector& y, double tol);

}  // namespace sensmpc
