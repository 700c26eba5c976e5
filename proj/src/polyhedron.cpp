#include "sensmpc/polyhedron.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sensmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Polyhedron::Polyhedron(Matrix gamma, Vector b) : gamma_(std::move(gamma)), b_(std::move(b)) {
    if (gamma_.rows() != b_.size())
        throw std::invalid_argument("Polyhedron: gamma row count must equal b length");

    // Box detection: every row has exactly one nonzero entry. Zero rows with
    // b >= 0 are vacuous; with b < 0 the set is empty.
    lb_ = Vector::Constant(dim(), -kInf);
    ub_ = Vector::Constant(dim(), kInf);
    is_box_ = true;
    for (Eigen::Index i = 0; i < rows() && is_box_; ++i) {
        Eigen::Index nz = -1;
        for (Eigen::Index j = 0; j < dim(); ++j) {
            if (gamma_(i, j) != 0.0) {
                if (nz >= 0) {
                    is_box_ = false;
                    break;
                }
                nz = j;
            }
        }
        if (!is_box_) break;
        if (nz < 0) {
            if (b_[i] < 0.0) box_empty_ = true;
            continue;
        }
        const double g = gamma_(i, nz);
        if (g > 0.0)
            ub_[nz] = std::min(ub_[nz], b_[i] / g);
        else
            lb_[nz] = std::max(lb_[nz], b_[i] / g);
    }
    if (is_box_) {
        for (Eigen::Index j = 0; j < dim(); ++j)
            if (lb_[j] > ub_[j]) box_empty_ = true;
    }
}

Polyhedron Polyhedron::unbounded(Eigen::Index dim) {
    return Polyhedron(Matrix(0, dim), Vector(0));
}

Polyhedron Polyhedron::box(const Vector& lo, const Vector& hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Polyhedron::box: bound size mismatch");
    const Eigen::Index n = lo.size();
    std::vector<std::pair<Eigen::Index, double>> entries;  // (component, sign)
    std::vector<double> rhs;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(hi[j])) {
            entries.emplace_back(j, 1.0);
            rhs.push_back(hi[j]);
        }
        if (std::isfinite(lo[j])) {
            entries.emplace_back(j, -1.0);
            rhs.push_back(-lo[j]);
        }
    }
    Matrix gamma = Matrix::Zero(static_cast<Eigen::Index>(entries.size()), n);
    Vector b(static_cast<Eigen::Index>(rhs.size()));
    for (size_t i = 0; i < entries.size(); ++i) {
        gamma(static_cast<Eigen::Index>(i), entries[i].first) = entries[i].second;
        b[static_cast<Eigen::Index>(i)] = rhs[i];
    }
    return Polyhedron(std::move(gamma), std::move(b));
}

double Polyhedron::violation(const Vector& x) const {
    if (rows() == 0) return -kInf;
    return (gamma_ * x - b_).maxCoeff();
}

IndexSet Polyhedron::active_set(const Vector& x, double tol) const {
    if (x.size() != dim()) throw std::invalid_argument("active_set: dimension mismatch");
    IndexSet active;
    if (rows() == 0) return active;
    Vector r = gamma_ * x - b_;
    Eigen::Index worst;
    if (r.maxCoeff(&worst) > tol) {
        std::ostringstream msg;
        msg << "active_set: point infeasible, row " << worst << " violated by " << r[worst];
        throw std::runtime_error(msg.str());
    }
    for (Eigen::Index i = 0; i < rows(); ++i)
        if (r[i] >= -tol) active.push_back(i);
    return active;
}

Vector Polyhedron::project(const Vector& y) const {
    if (y.size() != dim()) throw std::invalid_argument("project: dimension mismatch");
    if (rows() == 0) return y;
    if (is_box_) {
        if (box_empty_) throw std::runtime_error("project: polyhedron is empty");
        return y.cwiseMax(lb_).cwiseMin(ub_);
    }
    QpProblem qp(Matrix::Identity(dim(), dim()), -y, Matrix(0, dim()), Vector(0), gamma_, b_);
    QpSolution sol = solve_qp(qp, 1e-10, 200);
    if (sol.status == QpStatus::infeasible)
        throw std::runtime_error("project: polyhedron is empty");
    if (sol.status != QpStatus::optimal)
        throw std::runtime_error(std::string("project: QP solver failed with status ") +
                                 to_string(sol.status));
    return sol.x;
}

bool Polyhedron::normal_cone_contains(const Vector& x, const Vector& n, double tol) const {
    if (violation(x) > tol)
        throw std::runtime_error("normal_cone_contains: x is not in the polyhedron");
    return (project(x + n) - x).lpNorm<Eigen::Infinity>() <= tol;
}

Polyhedron Polyhedron::drop_row(Eigen::Index i) const {
    if (i < 0 || i >= rows()) throw std::out_of_range("drop_row: row index out of range");
    Matrix g(rows() - 1, dim());
    Vector bb(rows() - 1);
    g.topRows(i) = gamma_.topRows(i);
    bb.head(i) = b_.head(i);
    g.bottomRows(rows() - 1 - i) = gamma_.bottomRows(rows() - 1 - i);
    bb.tail(rows() - 1 - i) = b_.tail(rows() - 1 - i);
    return Polyhedron(std::move(g), std::move(bb));
}

IndexSet Polyhedron::redundant_constraints(const Vector& x, const Vector& n, double tol) const {
    IndexSet redundant;
    for (Eigen::Index i : active_set(x, tol)) {
        if (drop_row(i).normal_cone_contains(x, n, tol)) redundant.push_back(i);
    }
    return redundant;
}

ConeRep Polyhedron::critical_cone(const Vector& x, const Vector& n, double tol) const {
    IndexSet active = active_set(x, tol);

    // n should lie in the span of the active row normals; a residual beyond
    // tol indicates an inexact upstream solution. Proceed anyway.
    double span_residual;
    if (active.empty()) {
        span_residual = n.lpNorm<Eigen::Infinity>();
    } else {
        Matrix At(dim(), static_cast<Eigen::Index>(active.size()));
        for (size_t k = 0; k < active.size(); ++k) At.col(static_cast<Eigen::Index>(k)) = gamma_.row(active[k]).transpose();
        Vector coeff = At.colPivHouseholderQr().solve(n);
        span_residual = (n - At * coeff).lpNorm<Eigen::Infinity>();
    }
    if (span_residual > tol * (1.0 + n.lpNorm<Eigen::Infinity>()))
        std::fprintf(stderr,
                     "[sensmpc] warning: normal element off the active-row span by %.3e; "
                     "critical cone may be inaccurate\n",
                     span_residual);

    ConeRep cone;
    cone.ortho = n;
    IndexSet redundant = redundant_constraints(x, n, tol);
    cone.ineq_rows = redundant;
    for (Eigen::Index i : active)
        if (std::find(redundant.begin(), redundant.end(), i) == redundant.end())
            cone.eq_rows.push_back(i);
    return cone;
}

double Polyhedron::default_tol() const {
    const double bmax = rows() > 0 ? b_.lpNorm<Eigen::Infinity>() : 0.0;
    return 1e-8 * (1.0 + bmax);
}

bool cone_contains(const ConeRep& cone, const Polyhedron& P, const Vector& y, double tol) {
    for (Eigen::Index i : cone.ineq_rows)
        if (P.gamma().row(i).dot(y) > tol) return false;
    for (Eigen::Index i : cone.eq_rows)
        if (std::abs(P.gamma().row(i).dot(y)) > tol) return false;
    if (cone.ortho.size() > 0 && std::abs(cone.ortho.dot(y)) > tol) return false;
    return true;
}

}  // namespace sensmpc
