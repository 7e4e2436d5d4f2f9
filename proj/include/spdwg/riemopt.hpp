#pragma once

// Riemannian conjugate gradient over products of SPD cones (affine-invariant
// metric), a Euclidean factor, and a positive orthant (log metric).

#include "spdwg/airm.hpp"

#include <functional>
#include <string>
#include <vector>

namespace spdwg {

/// A point of P_{d1} x ... x P_{dk} x R^m x (0, inf)^r. Empty factors are
/// allowed; a wrapped Gaussian's (p, mu, Sigma) maps onto spd = {p, Sigma}
/// (full) or spd = {p}, pos = diag(Sigma) (diagonal), with euc = mu.
struct ProductPoint {
    std::vector<SpdMat> spd;
    Vector euc;
    Vector pos;
};

/// Tangent (or Euclidean gradient) with the same factor layout.
struct ProductTangent {
    std::vector<SymMat> spd;
    Vector euc;
    Vector pos;

    static ProductTangent zeros_like(const ProductPoint& x);
    Index total_dim() const;
    ProductTangent operator+(const ProductTangent& o) const;
    ProductTangent operator*(double s) const;
    ProductTangent operator-() const { return *this * -1.0; }
};

Index total_dim(const ProductPoint& x);
void require_same_shape(const ProductPoint& x, const ProductTangent& v);

/// Product metric: AIRM on SPD factors, dot product on the Euclidean factor,
/// sum a_i b_i / x_i^2 on the positive orthant.
double inner(const ProductPoint& x, const ProductTangent& a, const ProductTangent& b);
double norm(const ProductPoint& x, const ProductTangent& a);

/// SPD: G -> p sym(G) p; Euclidean: identity; orthant: g_i -> x_i^2 g_i.
ProductTangent riemannian_gradient(const ProductPoint& x, const ProductTangent& euclid_grad);

/// Exponential retraction on every factor.
ProductPoint retract(const ProductPoint& x, const ProductTangent& v, double step);

/// Transport of v (at `from`) to `to`, where `to` lies on the retraction
/// curve through `from`: parallel transport on SPD factors, identity on the
/// Euclidean factor, v_i to_i / from_i on the orthant.
ProductTangent transport(const ProductPoint& from, const ProductPoint& to, const ProductTangent& v);

using CostFn = std::function<double(const ProductPoint&)>;
/// Returns the Euclidean gradient.
using GradFn = std::function<ProductTangent(const ProductPoint&)>;

/// Central finite-difference Euclidean gradient. SPD factors are probed
/// along the orthonormal tangent basis (Exp_p(±h E_k)), the orthant along
/// log coordinates, and the Euclidean factor with steps h max(1, |x_i|).
ProductTangent finite_difference_gradient(const CostFn& cost, const ProductPoint& x, double h = 1e-5);

struct CgOptions {
    double tol = 1e-6;
    int max_iter = 5000;
    /// Restart to steepest descent every this many iterations; 0 means the
    /// total dimension of the product.
    int restart_every = 0;
    double armijo_c = 1e-4;
    int max_backtracks = 60;
    /// Finite-difference step when no gradient callback is supplied.
    double fd_step = 1e-5;
};

struct FitReport {
    int iterations = 0;
    double final_cost = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    double wall_time = 0.0;
    std::vector<double> cost_trace;
    std::string stop_reason;
    std::vector<std::string> warnings;
};

struct CgResult {
    ProductPoint point;
    FitReport report;
};

/// The optimizer could not evaluate a finite cost; carries the best iterate.
class OptimizationFailure : public NumericalFailure {
public:
    OptimizationFailure(const std::string& what, ProductPoint best, FitReport report)
        : NumericalFailure(what), best_(std::move(best)), report_(std::move(report)) {}
    const ProductPoint& best() const noexcept { return best_; }
    const FitReport& report() const noexcept { return report_; }

private:
    ProductPoint best_;
    FitReport report_;
};

/// Riemannian conjugate gradient (Hestenes-Stiefel, clipped at zero, with
/// restarts) and Armijo backtracking. `grad` may be empty, in which case
/// finite differences are used.
CgResult minimize_cg(const CostFn& cost, const GradFn& grad, const ProductPoint& init, const CgOptions& opts = {});

}  // namespace spdwg
