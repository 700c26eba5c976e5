#pragma once

#include <random>
#include <vector>

#include "sensmpc/polyhedron.hpp"

namespace sensmpc::testing {

inline Vector random_vec(std::mt19937& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

/// A random polyhedron instance with a known boundary point, a known active
/// set, and a normal element built as a nonnegative combination of active row
/// normals (some weights exactly zero, so weakly active rows occur).
/// Occasionally an active row is duplicated to break the LICQ.
struct ConeInstance {
    Matrix gamma;
    Vector b;
    Vector x;
    Vector normal;
    std::vector<Eigen::Index> active;
};

inline ConeInstance random_cone_instance(std::mt19937& rng, Eigen::Index dim_max = 4,
                                         Eigen::Index rows_max = 6) {
    std::uniform_int_distribution<Eigen::Index> dim_dist(2, dim_max);
    const Eigen::Index n = dim_dist(rng);
    std::uniform_int_distribution<Eigen::Index> row_dist(1, rows_max);
    Eigen::Index l = row_dist(rng);
    std::uniform_int_distribution<Eigen::Index> act_dist(1, std::min<Eigen::Index>(l, n + 1));
    const Eigen::Index n_active = act_dist(rng);
    std::bernoulli_distribution duplicate(0.25);
    std::bernoulli_distribution zero_weight(0.35);
    std::uniform_real_distribution<double> unif(0.2, 1.5);

    ConeInstance inst;
    inst.x = random_vec(rng, n);
    Matrix gamma(l, n);
    Vector b(l);
    for (Eigen::Index i = 0; i < l; ++i) {
        Vector row = random_vec(rng, n);
        row.normalize();
        gamma.row(i) = row.transpose();
        if (i < n_active) {
            b[i] = row.dot(inst.x);  // active at x
            inst.active.push_back(i);
        } else {
            b[i] = row.dot(inst.x) + unif(rng);  // strict slack
        }
    }
    if (duplicate(rng) && n_active >= 1) {
        // Duplicate one active row on top of an inactive slot if available.
        if (n_active < l) {
            gamma.row(n_active) = gamma.row(0);
            b[n_active] = b[0];
            inst.active.push_back(n_active);
        }
    }
    inst.gamma = gamma;
    inst.b = b;

    inst.normal = Vector::Zero(n);
    for (Eigen::Index i : inst.active) {
        const double w = zero_weight(rng) ? 0.0 : unif(rng);
        inst.normal += w * gamma.row(i).transpose();
    }
    return inst;
}

/// Direct critical-cone membership: y in T_P(x) (active rows only) and
/// y'normal = 0, all at absolute tolerance tol.
inline bool direct_cone_membership(const ConeInstance& inst, const Vector& y, double tol) {
    for (Eigen::Index i : inst.active)
        if (inst.gamma.row(i).dot(y) > tol) return false;
    return std::abs(inst.normal.dot(y)) <= tol;
}

/// Samples a direction for membership comparison. Half the draws are raw
/// Gaussians; the other half are projected onto the equality structure so
/// genuine members occur. Draws landing inside the tolerance knife-edge band
/// are rejected by the caller.
inline Vector sample_direction(std::mt19937& rng, const ConeInstance& inst, const ConeRep& cone,
                               bool project) {
    const Eigen::Index n = inst.gamma.cols();
    Vector y = random_vec(rng, n);
    if (!project) return y;
    // Project out the eq rows and the normal element.
    Matrix E(static_cast<Eigen::Index>(cone.eq_rows.size()) + 1, n);
    for (size_t k = 0; k < cone.eq_rows.size(); ++k)
        E.row(static_cast<Eigen::Index>(k)) = inst.gamma.row(cone.eq_rows[k]);
    E.row(E.rows() - 1) = inst.normal.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(E);
    y -= cod.pseudoInverse() * (E * y);
    return y;
}

}  // namespace sensmpc::testing
