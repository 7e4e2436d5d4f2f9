#pragma once

// Dense symmetric and symmetric positive definite matrices, their
// eigendecomposition and spectral matrix functions.

#include "spdwg/errors.hpp"

#include <Eigen/Dense>

#include <memory>

namespace spdwg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Symmetric d x d matrix. Storage is always exactly symmetric.
class SymMat {
public:
    SymMat() = default;

    /// Checked construction: rejects non-square, non-finite, or visibly
    /// asymmetric input (relative asymmetry above `tol`), then symmetrizes.
    explicit SymMat(const Matrix& m, double tol = 1e-9);

    /// Unchecked: returns (m + m^T) / 2. For results of products that are
    /// symmetric up to rounding.
    static SymMat symmetrize(const Matrix& m);

    static SymMat zero(Index d) { return symmetrize(Matrix::Zero(d, d)); }
    static SymMat identity(Index d) { return symmetrize(Matrix::Identity(d, d)); }
    static SymMat diagonal(const Vector& diag);

    Index dim() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Index i, Index j) const { return m_(i, j); }

    double trace() const { return m_.trace(); }
    double frobenius() const { return m_.norm(); }

    /// `a * this * a^T`, symmetrized.
    SymMat congruence(const Matrix& a) const { return symmetrize(a * m_ * a.transpose()); }

    SymMat operator+(const SymMat& o) const;
    SymMat operator-(const SymMat& o) const;
    SymMat operator-() const { return symmetrize(-m_); }
    SymMat operator*(double s) const { return symmetrize(s * m_); }
    friend SymMat operator*(double s, const SymMat& a) { return a * s; }

    friend bool operator==(const SymMat& a, const SymMat& b) {
        return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
    }

private:
    Matrix m_;
};

/// Eigenpairs of a symmetric matrix; values sorted descending, vectors in
/// the matching columns.
struct EigenDecomp {
    Matrix vectors;
    Vector values;

    /// vectors * diag(f(values)) * vectors^T
    template <typename F>
    SymMat apply(F&& f) const {
        Vector fv = values.unaryExpr(std::forward<F>(f));
        return SymMat::symmetrize(vectors * fv.asDiagonal() * vectors.transpose());
    }
};

EigenDecomp eigh(const SymMat& a);

/// Scalar function applied to the spectrum.
struct SpectralFn {
    enum class Kind { Exp, Log, Sqrt, InvSqrt, Pow };
    Kind kind = Kind::Exp;
    double alpha = 1.0;

    static SpectralFn exp() { return {Kind::Exp, 1.0}; }
    static SpectralFn log() { return {Kind::Log, 1.0}; }
    static SpectralFn sqrt() { return {Kind::Sqrt, 0.5}; }
    static SpectralFn invsqrt() { return {Kind::InvSqrt, -0.5}; }
    static SpectralFn pow(double a) { return {Kind::Pow, a}; }
};

SymMat spectral_fn(const SymMat& a, SpectralFn f);
SymMat spectral_fn(const EigenDecomp& e, SpectralFn f);

/// Relative positive-definiteness threshold used by `SpdMat`: the smallest
/// eigenvalue must exceed `eps * largest` (and an absolute floor of 1e-300).
/// Process-wide; default 1e-12.
double spd_relative_eps() noexcept;
void set_spd_relative_eps(double eps);

/// Symmetric positive definite matrix: a point of the manifold.
///
/// The eigendecomposition is computed once at construction (it is needed
/// for validation) and shared by copies, so square roots, logarithms and
/// inverses are cheap afterwards.
class SpdMat {
public:
    SpdMat() = default;

    /// Throws DomainError if the matrix is not positive definite.
    explicit SpdMat(const SymMat& a);
    explicit SpdMat(const Matrix& a) : SpdMat(SymMat(a)) {}

    /// From a known eigendecomposition (orthogonal vectors, positive values).
    static SpdMat from_eigen(EigenDecomp e);

    static SpdMat identity(Index d);
    static SpdMat diagonal(const Vector& diag);
    /// exp(a) for symmetric a; always SPD.
    static SpdMat exp_of(const SymMat& a);

    Index dim() const noexcept { return impl_ ? impl_->sym.dim() : 0; }
    const SymMat& sym() const { return impl_->sym; }
    const Matrix& matrix() const { return impl_->sym.matrix(); }
    const EigenDecomp& eig() const { return impl_->eig; }
    double operator()(Index i, Index j) const { return matrix()(i, j); }

    SymMat sqrt() const;
    SymMat invsqrt() const;
    SymMat log() const;
    SymMat inverse() const;
    SymMat pow(double a) const;
    double logdet() const;

    SpdMat scaled(double s) const;

    friend bool operator==(const SpdMat& a, const SpdMat& b) {
        return a.impl_ == b.impl_ || (a.impl_ && b.impl_ && a.sym() == b.sym());
    }
    friend bool operator!=(const SpdMat& a, const SpdMat& b) { return !(a == b); }

private:
    struct Impl {
        SymMat sym;
        EigenDecomp eig;
    };
    std::shared_ptr<const Impl> impl_;
};

/// Relative Frobenius distance ||a - b|| / max(||b||, tiny).
double rel_frobenius(const Matrix& a, const Matrix& b);

}  // namespace spdwg
