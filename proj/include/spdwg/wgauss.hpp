#pragma once

// Wrapped Gaussian distributions WG(p; mu, Sigma) on the SPD cone: the
// push-forward of N(mu, Sigma) on R^{d(d+1)/2} through Exp_p o Vect_p^-1.

#include "spdwg/airm.hpp"
#include "spdwg/random.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace spdwg {

enum class CovKind { Full, Diagonal };

const char* to_string(CovKind k) noexcept;
CovKind cov_kind_from_string(const std::string& s);

/// Covariance of the tangent-space normal: a full SPD matrix or a strictly
/// positive diagonal.
class CovSpec {
public:
    CovSpec() = default;
    static CovSpec full(SpdMat sigma);
    static CovSpec full(const Matrix& sigma) { return full(SpdMat(sigma)); }
    static CovSpec diagonal(Vector diag);
    static CovSpec identity(Index n, CovKind kind = CovKind::Full);

    CovKind kind() const noexcept { return kind_; }
    Index size() const noexcept { return kind_ == CovKind::Full ? full_.dim() : diag_.size(); }
    bool is_full() const noexcept { return kind_ == CovKind::Full; }

    const SpdMat& full_matrix() const;
    const Vector& diag() const;
    /// Dense n x n representation for either kind.
    Matrix dense() const;

    double logdet() const;
    /// r^T Sigma^-1 r
    double mahalanobis_sq(const Vector& r) const;
    /// L with L L^T = Sigma (Cholesky for the full kind).
    Matrix cholesky() const;
    /// Symmetric square root (or its inverse) applied to a vector.
    Vector apply_sqrt(const Vector& v, bool inverse = false) const;

    friend bool operator==(const CovSpec& a, const CovSpec& b);

private:
    CovKind kind_ = CovKind::Full;
    SpdMat full_;
    Vector diag_;
};

/// Parameters (p, mu, Sigma) of a wrapped Gaussian.
struct WgParams {
    SpdMat p;
    Vector mu;
    CovSpec sigma;

    WgParams() = default;
    /// Validates that mu and sigma have length d(d+1)/2.
    WgParams(SpdMat p, Vector mu, CovSpec sigma);

    Index dim() const noexcept { return p.dim(); }
    Index tangent_size() const noexcept { return mu.size(); }
};

/// Density generator of an elliptically contoured law:
/// f(t) = k det(Sigma)^-1/2 g((t-mu)^T Sigma^-1 (t-mu)).
struct EcGenerator {
    enum class Tag { Gaussian, StudentT };
    Tag tag = Tag::Gaussian;
    double dof = 0.0;

    static EcGenerator gaussian() { return {Tag::Gaussian, 0.0}; }
    static EcGenerator student_t(double nu);

    /// log g(t)
    double log_g(double t, Index n) const;
    /// log k for dimension n
    double log_normalizer(Index n) const;
};

/// Exp_p(Vect_p^-1(t))
SpdMat wrap_point(const SpdMat& p, const Vector& t);
/// Vect_p(Log_p(x))
Vector unwrap_point(const SpdMat& p, const SpdMat& x);

std::vector<SpdMat> sample(const WgParams& theta, std::size_t count, std::uint64_t seed);
std::vector<SpdMat> sample(const WgParams& theta, std::size_t count, Rng& rng);

/// log J_I(u) from the eigenvalues of u (any order).
double log_jacobian_det_identity(const Vector& eigenvalues);
/// log J_p(u) = log J_I(p^-1/2 u p^-1/2)
double log_jacobian_det(const SpdMat& p, const TangentVec& u);
/// J_p(u) = 2^{d(d-1)/2} prod_{i<j} sinh((l_i - l_j)/2) / (l_i - l_j)
double jacobian_det(const SpdMat& p, const TangentVec& u);

/// Unwrapped coordinates of x at p together with log J_p(Log_p x), from a
/// single eigendecomposition of p^-1/2 x p^-1/2.
struct UnwrapWithJacobian {
    Vector coords;
    double log_jacobian;
};
UnwrapWithJacobian unwrap_with_jacobian(const SpdMat& p, const SpdMat& x);
/// Same, with p^-1/2 supplied by the caller (for tight loops).
UnwrapWithJacobian unwrap_with_jacobian(const Matrix& p_invsqrt, const SpdMat& x);

double log_density(const WgParams& theta, const SpdMat& x);
double density(const WgParams& theta, const SpdMat& x);
double log_density_ec(const WgParams& theta, const EcGenerator& gen, const SpdMat& x);

/// (p, mu, Sigma) -> (e^t p, mu - t nu, Sigma): same distribution.
WgParams translate_class(const WgParams& theta, double t);

/// Representative of the equivalence class with the smallest ||mu||_2.
WgParams minimal_representative(const WgParams& theta);

enum class Direction { FromStandard, ToStandard };

/// Maps samples of WG(I; 0, I) to samples of theta (FromStandard), or back.
SpdMat standardize_map(const WgParams& theta, const SpdMat& x, Direction dir);

/// The three elementary transforms composed by `standardize_map`.
namespace transforms {

/// x -> p^-1/2 x p^-1/2 (or p^1/2 x p^1/2 with inverse): WG(p; mu, S) -> WG(I; mu, S).
SpdMat congruence(const SpdMat& p, const SpdMat& x, bool inverse = false);
/// x -> Exp_p(Log_p x - Vect_p^-1(mu)) (plus with inverse): WG(p; mu, S) -> WG(p; 0, S).
SpdMat tangent_translate(const SpdMat& p, const Vector& mu, const SpdMat& x, bool inverse = false);
/// x -> Exp_p(Vect_p^-1(S^-1/2 Vlog_p x)) (S^1/2 with inverse): WG(p; 0, S) -> WG(p; 0, I).
SpdMat tangent_scale(const SpdMat& p, const CovSpec& sigma, const SpdMat& x, bool inverse = false);

}  // namespace transforms

/// Wrapped central limit statistic Exp_base(n^-1/2 sum_i (Log_base x_i - Vect_base^-1(mu))).
SpdMat clt_statistic(std::span<const SpdMat> xs, const Vector& mu_hat, const SpdMat& base);
SpdMat clt_statistic(std::span<const SpdMat> xs, const Vector& mu_hat);
/// The same statistic through literal logarithmic products and a matrix
/// power, (⊙_i (x_i ⊙ m^-1))^{1/sqrt(n)} at the identity.
SpdMat clt_statistic_power_form(std::span<const SpdMat> xs, const Vector& mu_hat);

}  // namespace spdwg
