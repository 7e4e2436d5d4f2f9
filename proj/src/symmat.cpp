#include "spdwg/symmat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace spdwg {

namespace {

std::atomic<double> g_spd_eps{1e-12};

constexpr double kAbsFloor = 1e-300;

}  // namespace

SymMat::SymMat(const Matrix& m, double tol) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw InvalidInput("symmetric matrix must be square and non-empty, got " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    if (!m.allFinite()) throw InvalidInput("matrix has non-finite entries");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
        throw InvalidInput("matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    m_ = 0.5 * (m + m.transpose());
}

SymMat SymMat::symmetrize(const Matrix& m) {
    SymMat s;
    s.m_ = 0.5 * (m + m.transpose());
    return s;
}

SymMat SymMat::diagonal(const Vector& diag) {
    SymMat s;
    s.m_ = diag.asDiagonal();
    return s;
}

SymMat SymMat::operator+(const SymMat& o) const {
    if (dim() != o.dim()) throw DimMismatch("symmetric matrix dimensions differ");
    SymMat s;
    s.m_ = m_ + o.m_;
    return s;
}

SymMat SymMat::operator-(const SymMat& o) const {
    if (dim() != o.dim()) throw DimMismatch("symmetric matrix dimensions differ");
    SymMat s;
    s.m_ = m_ - o.m_;
    return s;
}

EigenDecomp eigh(const SymMat& a) {
    const Matrix& m = a.matrix();
    if (m.size() == 0) throw InvalidInput("eigh of an empty matrix");
    if (!m.allFinite()) throw InvalidInput("eigh: non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw NumericalFailure("eigh: symmetric eigensolver did not converge");
    // Eigen returns ascending order; flip to descending.
    EigenDecomp e;
    e.values = solver.eigenvalues().reverse();
    e.vectors = solver.eigenvectors().rowwise().reverse();
    return e;
}

SymMat spectral_fn(const EigenDecomp& e, SpectralFn f) {
    using K = SpectralFn::Kind;
    if (f.kind != K::Exp) {
        const double lo = e.values.minCoeff();
        if (!(lo > 0.0)) throw DomainError("spectral function requires positive eigenvalues (min " + std::to_string(lo) + ")");
    }
    switch (f.kind) {
        case K::Exp: return e.apply([](double x) { return std::exp(x); });
        case K::Log: return e.apply([](double x) { return std::log(x); });
        case K::Sqrt: return e.apply([](double x) { return std::sqrt(x); });
        case K::InvSqrt: return e.apply([](double x) { return 1.0 / std::sqrt(x); });
        case K::Pow: {
            const double a = f.alpha;
            return e.apply([a](double x) { return std::pow(x, a); });
        }
    }
    throw InvalidInput("unknown spectral function");
}

SymMat spectral_fn(const SymMat& a, SpectralFn f) { return spectral_fn(eigh(a), f); }

double spd_relative_eps() noexcept { return g_spd_eps.load(std::memory_order_relaxed); }

void set_spd_relative_eps(double eps) {
    if (!(eps >= 0.0) || !(eps < 1.0)) throw InvalidInput("SPD relative eps must lie in [0, 1)");
    g_spd_eps.store(eps, std::memory_order_relaxed);
}

SpdMat::SpdMat(const SymMat& a) {
    EigenDecomp e = eigh(a);
    const double hi = e.values(0);
    const double lo = e.values(e.values.size() - 1);
    const double threshold = std::max(spd_relative_eps() * std::abs(hi), kAbsFloor);
    if (!(lo > threshold))
        throw DomainError("matrix is not positive definite (min eigenvalue " + std::to_string(lo) +
                          ", max " + std::to_string(hi) + ")");
    impl_ = std::make_shared<const Impl>(Impl{a, std::move(e)});
}

SpdMat SpdMat::from_eigen(EigenDecomp e) {
    if (e.values.size() == 0) throw InvalidInput("empty eigendecomposition");
    // keep the descending-order convention
    std::vector<Index> order(static_cast<std::size_t>(e.values.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return e.values(a) > e.values(b); });
    EigenDecomp s;
    s.values.resize(e.values.size());
    s.vectors.resize(e.vectors.rows(), e.vectors.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
        s.values(static_cast<Index>(i)) = e.values(order[i]);
        s.vectors.col(static_cast<Index>(i)) = e.vectors.col(order[i]);
    }
    const double hi = s.values(0);
    const double lo = s.values(s.values.size() - 1);
    if (!std::isfinite(hi) || !(lo > std::max(spd_relative_eps() * hi, kAbsFloor)))
        throw DomainError("eigenvalues do not define a positive definite matrix (min " + std::to_string(lo) +
                          ", max " + std::to_string(hi) + ")");
    SpdMat p;
    SymMat sym = s.apply([](double x) { return x; });
    p.impl_ = std::make_shared<const Impl>(Impl{std::move(sym), std::move(s)});
    return p;
}

SpdMat SpdMat::identity(Index d) {
    EigenDecomp e{Matrix::Identity(d, d), Vector::Ones(d)};
    SpdMat p;
    p.impl_ = std::make_shared<const Impl>(Impl{SymMat::identity(d), std::move(e)});
    return p;
}

SpdMat SpdMat::diagonal(const Vector& diag) { return SpdMat(SymMat::diagonal(diag)); }

SpdMat SpdMat::exp_of(const SymMat& a) {
    EigenDecomp e = eigh(a);
    e.values = e.values.array().exp();
    return from_eigen(std::move(e));
}

SymMat SpdMat::sqrt() const { return spectral_fn(eig(), SpectralFn::sqrt()); }
SymMat SpdMat::invsqrt() const { return spectral_fn(eig(), SpectralFn::invsqrt()); }
SymMat SpdMat::log() const { return spectral_fn(eig(), SpectralFn::log()); }
SymMat SpdMat::inverse() const { return spectral_fn(eig(), SpectralFn::pow(-1.0)); }
SymMat SpdMat::pow(double a) const { return spectral_fn(eig(), SpectralFn::pow(a)); }
double SpdMat::logdet() const { return eig().values.array().log().sum(); }

SpdMat SpdMat::scaled(double s) const {
    if (!(s > 0.0)) throw DomainError("SPD matrix can only be scaled by a positive factor");
    EigenDecomp e = eig();
    e.values *= s;
    SpdMat p;
    p.impl_ = std::make_shared<const Impl>(Impl{sym() * s, std::move(e)});
    return p;
}

double rel_frobenius(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

}  // namespace spdwg
