#pragma once

// Affine-invariant Riemannian geometry of the SPD cone: metric, distance,
// exponential and logarithm maps, vectorization of tangent spaces,
// orthonormal bases, parallel transport, Karcher mean and the logarithmic
// product.

#include "spdwg/symmat.hpp"

#include <span>
#include <vector>

namespace spdwg {

/// Tangent vector at `base`, stored as a symmetric matrix.
class TangentVec {
public:
    TangentVec() = default;
    TangentVec(SpdMat base, SymMat vec);

    static TangentVec zero(const SpdMat& base) { return {base, SymMat::zero(base.dim())}; }

    const SpdMat& base() const noexcept { return base_; }
    const SymMat& vec() const noexcept { return vec_; }
    Index dim() const noexcept { return vec_.dim(); }

    TangentVec operator+(const TangentVec& o) const;
    TangentVec operator-(const TangentVec& o) const;
    TangentVec operator*(double s) const { return {base_, vec_ * s}; }
    friend TangentVec operator*(double s, const TangentVec& u) { return u * s; }

private:
    SpdMat base_;
    SymMat vec_;
};

/// Coordinates of a tangent vector in the orthonormal basis at `base`.
class VecCoord {
public:
    VecCoord() = default;
    VecCoord(SpdMat base, Vector coords);

    const SpdMat& base() const noexcept { return base_; }
    const Vector& coords() const noexcept { return coords_; }

private:
    SpdMat base_;
    Vector coords_;
};

/// n = d(d+1)/2
constexpr Index tangent_dim(Index d) noexcept { return d * (d + 1) / 2; }

/// Recovers d from n = d(d+1)/2; throws DimMismatch if n is not triangular.
Index matrix_dim_from_tangent_dim(Index n);

/// Positions of diagonal entries in the vectorized ordering
/// (u11, √2 u12, u22, √2 u13, √2 u23, u33, ...). For d = 2: {0, 2}.
std::vector<Index> diag_index_set(Index d);

/// Column-wise upper-triangle ordering with √2 on off-diagonal entries.
Vector vectorize_at_identity(const SymMat& u);
SymMat unvectorize_at_identity(const Vector& t);

void require_same_base(const SpdMat& p, const TangentVec& u);
void require_same_dim(const SpdMat& p, const SpdMat& q);

/// tr(p^-1 u p^-1 v)
double inner(const SpdMat& p, const TangentVec& u, const TangentVec& v);
double norm(const SpdMat& p, const TangentVec& u);

/// ||log(p^{-1/2} q p^{-1/2})||_F
double dist(const SpdMat& p, const SpdMat& q);

SpdMat exp_map(const SpdMat& p, const TangentVec& u);
TangentVec log_map(const SpdMat& p, const SpdMat& q);

/// p^{-1/2} q p^{-1/2}, as a point (shares the affine-invariant whitening
/// used by the maps above).
SpdMat whiten(const SpdMat& p, const SpdMat& q);

VecCoord vectorize(const SpdMat& p, const TangentVec& u);
TangentVec unvectorize(const VecCoord& t);

/// vectorize(p, p): the indicator of the diagonal coordinates.
VecCoord nu_vector(const SpdMat& p);

/// E_{p,ij} = p^{1/2} E_{I,ij} p^{1/2} in vectorization order.
std::vector<TangentVec> tangent_basis(const SpdMat& p);

/// p^{1/2} u p^{1/2}
TangentVec ptransport_from_identity(const SpdMat& p, const TangentVec& u);

/// Parallel transport along the geodesic from u.base() to q:
/// E u E^T with E = p^{1/2} (p^{-1/2} q p^{-1/2})^{1/2} p^{-1/2}.
TangentVec ptransport(const SpdMat& q, const TangentVec& u);

struct KarcherOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

/// Riemannian (Karcher) mean by the fixed-point iteration
/// p <- Exp_p(mean_i Log_p x_i), halving the step whenever the sum of
/// squared distances fails to decrease. Converged when
/// ||mean_i Log_p x_i||_p <= tol.
SpdMat karcher_mean(std::span<const SpdMat> xs, const KarcherOptions& opts = {});

/// exp(log q1 + log q2)
SpdMat log_product(const SpdMat& q1, const SpdMat& q2);
/// Exp_p(Log_p q1 + Log_p q2)
SpdMat log_product(const SpdMat& q1, const SpdMat& q2, const SpdMat& base);

}  // namespace spdwg
