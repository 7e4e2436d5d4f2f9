#include "spdwg/airm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spdwg {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Eigenvalue floor used only by the distance.
constexpr double kDistEigFloor = 1e-15;

SymMat whiten_sym(const SpdMat& p, const SymMat& a) { return a.congruence(p.invsqrt().matrix()); }

double sum_sq_log_eigs(const SymMat& w) {
    const Vector lam = eigh(w).values;
    double s = 0.0;
    for (Index i = 0; i < lam.size(); ++i) {
        const double l = std::log(std::max(lam(i), kDistEigFloor));
        s += l * l;
    }
    return s;
}

}  // namespace

TangentVec::TangentVec(SpdMat base, SymMat vec) : base_(std::move(base)), vec_(std::move(vec)) {
    if (base_.dim() != vec_.dim())
        throw DimMismatch("tangent vector of dim " + std::to_string(vec_.dim()) + " at base of dim " +
                          std::to_string(base_.dim()));
}

TangentVec TangentVec::operator+(const TangentVec& o) const {
    if (base_ != o.base_) throw BaseMismatch("adding tangent vectors at different base points");
    return {base_, vec_ + o.vec_};
}

TangentVec TangentVec::operator-(const TangentVec& o) const {
    if (base_ != o.base_) throw BaseMismatch("subtracting tangent vectors at different base points");
    return {base_, vec_ - o.vec_};
}

VecCoord::VecCoord(SpdMat base, Vector coords) : base_(std::move(base)), coords_(std::move(coords)) {
    if (coords_.size() != tangent_dim(base_.dim()))
        throw DimMismatch("coordinate vector of length " + std::to_string(coords_.size()) + " at base of dim " +
                          std::to_string(base_.dim()));
}

Index matrix_dim_from_tangent_dim(Index n) {
    const auto d = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0));
    if (d < 1 || tangent_dim(d) != n)
        throw DimMismatch("length " + std::to_string(n) + " is not of the form d(d+1)/2");
    return d;
}

std::vector<Index> diag_index_set(Index d) {
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(d));
    // Column j contributes j+1 entries; its diagonal is the last one.
    Index k = 0;
    for (Index j = 0; j < d; ++j) {
        k += j + 1;
        idx.push_back(k - 1);
    }
    return idx;
}

Vector vectorize_at_identity(const SymMat& u) {
    const Index d = u.dim();
    Vector t(tangent_dim(d));
    Index k = 0;
    for (Index j = 0; j < d; ++j) {
        for (Index i = 0; i < j; ++i) t(k++) = kSqrt2 * u(i, j);
        t(k++) = u(j, j);
    }
    return t;
}

SymMat unvectorize_at_identity(const Vector& t) {
    const Index d = matrix_dim_from_tangent_dim(t.size());
    Matrix m(d, d);
    Index k = 0;
    for (Index j = 0; j < d; ++j) {
        for (Index i = 0; i < j; ++i) {
            const double v = kInvSqrt2 * t(k++);
            m(i, j) = v;
            m(j, i) = v;
        }
        m(j, j) = t(k++);
    }
    return SymMat::symmetrize(m);
}

void require_same_base(const SpdMat& p, const TangentVec& u) {
    if (p.dim() != u.dim()) throw DimMismatch("tangent vector dimension differs from base dimension");
    if (u.base() != p) throw BaseMismatch("tangent vector is not based at the given point");
}

void require_same_dim(const SpdMat& p, const SpdMat& q) {
    if (p.dim() != q.dim())
        throw DimMismatch("SPD dimensions differ: " + std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
}

double inner(const SpdMat& p, const TangentVec& u, const TangentVec& v) {
    require_same_base(p, u);
    require_same_base(p, v);
    const Matrix pinv = p.inverse().matrix();
    return (pinv * u.vec().matrix() * pinv * v.vec().matrix()).trace();
}

double norm(const SpdMat& p, const TangentVec& u) {
    require_same_base(p, u);
    return whiten_sym(p, u.vec()).frobenius();
}

double dist(const SpdMat& p, const SpdMat& q) {
    require_same_dim(p, q);
    if (p == q) return 0.0;
    return std::sqrt(sum_sq_log_eigs(whiten_sym(p, q.sym())));
}

SpdMat whiten(const SpdMat& p, const SpdMat& q) {
    require_same_dim(p, q);
    return SpdMat(whiten_sym(p, q.sym()));
}

SpdMat exp_map(const SpdMat& p, const TangentVec& u) {
    require_same_base(p, u);
    const SymMat e = spectral_fn(whiten_sym(p, u.vec()), SpectralFn::exp());
    return SpdMat(e.congruence(p.sqrt().matrix()));
}

TangentVec log_map(const SpdMat& p, const SpdMat& q) {
    require_same_dim(p, q);
    if (p == q) return TangentVec::zero(p);
    const SymMat l = spectral_fn(whiten_sym(p, q.sym()), SpectralFn::log());
    return {p, l.congruence(p.sqrt().matrix())};
}

VecCoord vectorize(const SpdMat& p, const TangentVec& u) {
    require_same_base(p, u);
    return {p, vectorize_at_identity(whiten_sym(p, u.vec()))};
}

TangentVec unvectorize(const VecCoord& t) {
    const SpdMat& p = t.base();
    return {p, unvectorize_at_identity(t.coords()).congruence(p.sqrt().matrix())};
}

VecCoord nu_vector(const SpdMat& p) { return vectorize(p, TangentVec(p, p.sym())); }

std::vector<TangentVec> tangent_basis(const SpdMat& p) {
    const Index d = p.dim();
    const Index n = tangent_dim(d);
    const SpdMat id = SpdMat::identity(d);
    std::vector<TangentVec> basis;
    basis.reserve(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        Vector e = Vector::Zero(n);
        e(k) = 1.0;
        basis.push_back(ptransport_from_identity(p, TangentVec(id, unvectorize_at_identity(e))));
    }
    return basis;
}

TangentVec ptransport_from_identity(const SpdMat& p, const TangentVec& u) {
    if (u.dim() != p.dim()) throw DimMismatch("transport between spaces of different dimension");
    if (u.base() != SpdMat::identity(p.dim())) throw BaseMismatch("tangent vector is not based at the identity");
    return {p, u.vec().congruence(p.sqrt().matrix())};
}

TangentVec ptransport(const SpdMat& q, const TangentVec& u) {
    const SpdMat& p = u.base();
    require_same_dim(p, q);
    if (p == q) return u;
    const Matrix ps = p.sqrt().matrix();
    const Matrix pis = p.invsqrt().matrix();
    const SymMat w = whiten_sym(p, q.sym());
    const Matrix e = ps * spectral_fn(w, SpectralFn::sqrt()).matrix() * pis;
    return {q, u.vec().congruence(e)};
}

SpdMat karcher_mean(std::span<const SpdMat> xs, const KarcherOptions& opts) {
    if (xs.empty()) throw InvalidInput("Karcher mean of an empty set");
    const Index d = xs.front().dim();
    for (const auto& x : xs) require_same_dim(xs.front(), x);
    if (xs.size() == 1) return xs.front();

    const double inv_n = 1.0 / static_cast<double>(xs.size());

    // Log-Euclidean mean as the starting point.
    Matrix log_sum = Matrix::Zero(d, d);
    for (const auto& x : xs) log_sum += x.log().matrix();
    SpdMat p = SpdMat::exp_of(SymMat::symmetrize(inv_n * log_sum));

    // Mean whitened log and the sum of squared distances at p.
    auto evaluate = [&](const SpdMat& at, Matrix& mean_log) {
        const Matrix pis = at.invsqrt().matrix();
        mean_log.setZero(d, d);
        double f = 0.0;
        for (const auto& x : xs) {
            const EigenDecomp e = eigh(x.sym().congruence(pis));
            Vector ll(e.values.size());
            for (Index i = 0; i < ll.size(); ++i) ll(i) = std::log(std::max(e.values(i), kDistEigFloor));
            f += ll.squaredNorm();
            mean_log += e.vectors * ll.asDiagonal() * e.vectors.transpose();
        }
        mean_log *= inv_n;
        return f;
    };

    Matrix g;
    double f = evaluate(p, g);
    for (int it = 0; it < opts.max_iter; ++it) {
        const SymMat grad = SymMat::symmetrize(g);
        if (grad.frobenius() <= opts.tol) return p;

        const Matrix ps = p.sqrt().matrix();
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h < 60; ++h, step *= 0.5) {
            const SpdMat cand(spectral_fn(grad * step, SpectralFn::exp()).congruence(ps));
            Matrix g_cand;
            const double f_cand = evaluate(cand, g_cand);
            // Near the fixed point f stops resolving the decrease; a smaller
            // gradient within rounding of f is then accepted as progress.
            const bool within_rounding = f_cand <= f + 1e-13 * std::max(f, 1.0) &&
                                         SymMat::symmetrize(g_cand).frobenius() < grad.frobenius();
            if (f_cand < f || within_rounding) {
                p = cand;
                f = f_cand;
                g = std::move(g_cand);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw NumericalFailure("Karcher mean stalled with gradient norm " + std::to_string(grad.frobenius()),
                                   p.matrix());
        }
    }
    if (SymMat::symmetrize(g).frobenius() <= opts.tol) return p;
    throw NumericalFailure("Karcher mean did not converge in " + std::to_string(opts.max_iter) + " iterations",
                           p.matrix());
}

SpdMat log_product(const SpdMat& q1, const SpdMat& q2) {
    require_same_dim(q1, q2);
    return SpdMat::exp_of(q1.log() + q2.log());
}

SpdMat log_product(const SpdMat& q1, const SpdMat& q2, const SpdMat& base) {
    require_same_dim(q1, q2);
    require_same_dim(q1, base);
    return exp_map(base, log_map(base, q1) + log_map(base, q2));
}

}  // namespace spdwg
