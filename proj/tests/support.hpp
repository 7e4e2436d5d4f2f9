#pragma once

// Test-side generators and oracles. Matrix functions here go through
// Eigen's Pade/Schur implementations, never through the library's spectral
// code, so they serve as independent references.

#include "spdwg/wgauss.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace testing {

using spdwg::Index;
using spdwg::Matrix;
using spdwg::Rng;
using spdwg::Vector;

inline Matrix random_orthogonal(Rng& rng, Index d) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
    Matrix q = qr.householderQ();
    return q;
}

inline Matrix random_sym_matrix(Rng& rng, Index d, double scale = 1.0) {
    const Matrix a = rng.normal_matrix(d, d) * scale;
    return 0.5 * (a + a.transpose());
}

inline spdwg::SymMat random_sym(Rng& rng, Index d, double scale = 1.0) {
    return spdwg::SymMat::symmetrize(random_sym_matrix(rng, d, scale));
}

/// Q diag(exp(g)) Q^T with g normal(0, spread^2): condition numbers stay moderate.
inline spdwg::SpdMat random_spd(Rng& rng, Index d, double spread = 0.7) {
    const Matrix q = random_orthogonal(rng, d);
    Vector l(d);
    for (Index i = 0; i < d; ++i) l(i) = std::exp(spread * rng.normal());
    return spdwg::SpdMat(spdwg::SymMat::symmetrize(q * l.asDiagonal() * q.transpose()));
}

inline Matrix ref_exp(const Matrix& a) { return a.exp(); }
inline Matrix ref_log(const Matrix& a) { return a.log(); }
inline Matrix ref_sqrt(const Matrix& a) { return a.sqrt(); }

inline Matrix ref_exp_map(const Matrix& p, const Matrix& u) {
    const Matrix s = ref_sqrt(p);
    const Matrix si = s.inverse();
    return s * ref_exp(si * u * si) * s;
}

inline Matrix ref_log_map(const Matrix& p, const Matrix& q) {
    const Matrix s = ref_sqrt(p);
    const Matrix si = s.inverse();
    const Matrix w = si * q * si;
    return s * ref_log(0.5 * (w + w.transpose())) * s;
}

/// Column-wise upper triangle with sqrt(2) off the diagonal, written out
/// independently of the library.
inline Vector ref_vect_identity(const Matrix& u) {
    const Index d = u.rows();
    Vector t(d * (d + 1) / 2);
    Index k = 0;
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i <= j; ++i) t(k++) = (i == j ? 1.0 : std::sqrt(2.0)) * u(i, j);
    return t;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// Standard multivariate normal log-density in n dimensions via Cholesky.
inline double ref_mvn_logpdf(const Vector& x, const Vector& mu, const Matrix& sigma) {
    Eigen::LLT<Matrix> llt(sigma);
    const Matrix l = llt.matrixL();
    const Vector z = l.triangularView<Eigen::Lower>().solve(x - mu);
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI) - 0.5 * logdet - 0.5 * z.squaredNorm();
}

}  // namespace testing
