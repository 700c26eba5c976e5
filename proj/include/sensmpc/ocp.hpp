#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sensmpc/polyhedron.hpp"

namespace sensmpc {

/// Discrete-time dynamics x+ = f(x, u) with analytic first derivatives and
/// costate-weighted curvature. The Hessian of f enters the KKT matrices only
/// as the contraction sum_r w_r * Hess f_r over the joint (x, u) variable, so
/// that is the interface; full third-order tensors are never materialized.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;
    virtual Eigen::Index state_dim() const = 0;
    virtual Eigen::Index input_dim() const = 0;
    virtual Vector eval(const Vector& x, const Vector& u) const = 0;
    /// A = df/dx (n x n), B = df/du (n x m).
    virtual void jacobians(const Vector& x, const Vector& u, Matrix& A, Matrix& B) const = 0;
    /// sum_r w_r * Hess f_r, symmetric (n+m) x (n+m) over (x, u).
    virtual Matrix costate_hessian(const Vector& x, const Vector& u, const Vector& w) const = 0;
};

/// Stage cost l(x, u); gradient and Hessian are over the stacked (x, u).
class StageCost {
public:
    virtual ~StageCost() = default;
    virtual double value(const Vector& x, const Vector& u) const = 0;
    virtual Vector gradient(const Vector& x, const Vector& u) const = 0;
    virtual Matrix hessian(const Vector& x, const Vector& u) const = 0;
};

class TerminalCost {
public:
    virtual ~TerminalCost() = default;
    virtual double value(const Vector& x) const = 0;
    virtual Vector gradient(const Vector& x) const = 0;
    virtual Matrix hessian(const Vector& x) const = 0;
};

/// Horizon-N optimal control problem parameterized by the initial state p:
///
///   min  phi(x_N) + sum_{i=0}^{N-1} l(x_i, u_i),   x_0 = p,
///   s.t. x_{i+1} = f(x_i, u_i),
///        u_0 in U0,  (x_i, u_i) in Z_i (i = 1..N-1),  x_N in X_N,
///
/// with all sets polyhedral. Stacked decision vector
/// v = (u_0, x_1, u_1, ..., u_{N-1}, x_N) of length j = N(m+n); the costate
/// vector q has length d = N*n.
struct OcpDefinition {
    int N;
    std::shared_ptr<const DynamicsModel> dynamics;
    std::shared_ptr<const StageCost> stage_cost;
    std::shared_ptr<const TerminalCost> terminal_cost;
    Polyhedron u0_set;
    std::vector<Polyhedron> z_sets;  // Z_1 .. Z_{N-1}, rows over (x, u)
    Polyhedron xn_set;

    OcpDefinition(int N_, std::shared_ptr<const DynamicsModel> dyn,
                  std::shared_ptr<const StageCost> lcost,
                  std::shared_ptr<const TerminalCost> tcost, Polyhedron u0, std::vector<Polyhedron> z,
                  Polyhedron xn);

    Eigen::Index n() const { return dynamics->state_dim(); }
    Eigen::Index m() const { return dynamics->input_dim(); }
    Eigen::Index num_vars() const { return static_cast<Eigen::Index>(N) * (n() + m()); }
    Eigen::Index num_eq() const { return static_cast<Eigen::Index>(N) * n(); }

    /// Offset of u_k in v, k = 0..N-1.
    Eigen::Index u_offset(int k) const { return static_cast<Eigen::Index>(k) * (n() + m()); }
    /// Offset of x_k in v, k = 1..N.
    Eigen::Index x_offset(int k) const {
        return static_cast<Eigen::Index>(k - 1) * (n() + m()) + m();
    }

    /// The product structure of V: per-factor (offset into v, set). Factors
    /// are U0, Z_1, ..., Z_{N-1}, X_N in that order.
    struct StageBlock {
        Eigen::Index offset;
        const Polyhedron* set;
    };
    std::vector<StageBlock> stage_blocks() const;
};

struct PrimalDual {
    Vector v;
    Vector q;
};

/// KKT matrices of the stacked NLP at a reference primal-dual point:
/// R = Hess_v L, G = grad_v g, P = grad_pv L, Q = grad_p g, plus grad_v L and
/// g itself. P is nonzero only in the u_0 block and Q only in its first n
/// rows; only the first dynamics residual touches the parameter.
struct KktData {
    Matrix R;
    Matrix G;
    Matrix P;
    Matrix Q;
    Vector grad_l;
    Vector g;
};

/// Block-diagonal stacking of U0, Z_1, ..., Z_{N-1}, X_N into {v | Mv <= h},
/// rows in that order.
Polyhedron stack_constraints(const OcpDefinition& ocp);

/// Dynamics residuals g(p, v): stage i component x_i - f(x_{i-1}, u_{i-1})
/// with x_0 = p.
Vector eval_g(const OcpDefinition& ocp, const Vector& p, const Vector& v);

double eval_cost(const OcpDefinition& ocp, const Vector& p, const Vector& v);

/// F(p, z) = (grad_v L, g) with L = J + q'g, so grad_v L = grad J + G'q.
Vector eval_F(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z);

KktData eval_kkt_data(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z);

/// v obtained by rolling the dynamics out from p under the given input
/// sequence (m*N entries, stage-major); by construction g(p, v) = 0.
Vector rollout(const OcpDefinition& ocp, const Vector& p, const Vector& inputs);
Vector rollout_zero(const OcpDefinition& ocp, const Vector& p);

/// Stage-wise Euclidean projection of y onto V.
Vector project_onto_V(const OcpDefinition& ocp, const Vector& y);

/// Central-difference validation of all supplied derivatives and of the
/// assembled KKT matrices against differenced eval_F. Keys name the block;
/// values are max relative errors.
struct DerivativeReport {
    std::map<std::string, double> block_errors;
    double max_error() const;
};

DerivativeReport check_derivatives(const OcpDefinition& ocp, const Vector& p, const PrimalDual& z,
                                   double h);

}  // namespace sensmpc
