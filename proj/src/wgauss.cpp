#include "spdwg/wgauss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace spdwg {

namespace {

constexpr double kJacobianSeriesThreshold = 1e-7;

// log(2 sinh(x/2) / x) for x >= 0
double log_sinhc_factor(double x) {
    if (x < kJacobianSeriesThreshold) return std::log1p(x * x / 24.0);
    return 0.5 * x + std::log(-std::expm1(-x)) - std::log(x);
}

double dot_nu(const Vector& mu, Index d) {
    double s = 0.0;
    for (Index k : diag_index_set(d)) s += mu(k);
    return s;
}

}  // namespace

const char* to_string(CovKind k) noexcept { return k == CovKind::Full ? "full" : "diag"; }

CovKind cov_kind_from_string(const std::string& s) {
    if (s == "full") return CovKind::Full;
    if (s == "diag" || s == "diagonal") return CovKind::Diagonal;
    throw InvalidInput("unknown covariance kind '" + s + "' (expected full or diag)");
}

CovSpec CovSpec::full(SpdMat sigma) {
    CovSpec c;
    c.kind_ = CovKind::Full;
    c.full_ = std::move(sigma);
    return c;
}

CovSpec CovSpec::diagonal(Vector diag) {
    if (diag.size() == 0) throw InvalidInput("empty diagonal covariance");
    if (!diag.allFinite() || !(diag.minCoeff() > 0.0))
        throw InvalidInput("diagonal covariance entries must be finite and strictly positive");
    CovSpec c;
    c.kind_ = CovKind::Diagonal;
    c.diag_ = std::move(diag);
    return c;
}

CovSpec CovSpec::identity(Index n, CovKind kind) {
    return kind == CovKind::Full ? full(SpdMat::identity(n)) : diagonal(Vector::Ones(n));
}

const SpdMat& CovSpec::full_matrix() const {
    if (kind_ != CovKind::Full) throw InvalidInput("covariance is diagonal, not full");
    return full_;
}

const Vector& CovSpec::diag() const {
    if (kind_ != CovKind::Diagonal) throw InvalidInput("covariance is full, not diagonal");
    return diag_;
}

Matrix CovSpec::dense() const { return kind_ == CovKind::Full ? full_.matrix() : Matrix(diag_.asDiagonal()); }

double CovSpec::logdet() const { return kind_ == CovKind::Full ? full_.logdet() : diag_.array().log().sum(); }

double CovSpec::mahalanobis_sq(const Vector& r) const {
    if (r.size() != size()) throw DimMismatch("residual length does not match covariance size");
    if (kind_ == CovKind::Diagonal) return (r.array().square() / diag_.array()).sum();
    const EigenDecomp& e = full_.eig();
    const Vector y = e.vectors.transpose() * r;
    return (y.array().square() / e.values.array()).sum();
}

Matrix CovSpec::cholesky() const {
    if (kind_ == CovKind::Diagonal) return Matrix(diag_.cwiseSqrt().asDiagonal());
    Eigen::LLT<Matrix> llt(full_.matrix());
    if (llt.info() != Eigen::Success) throw NumericalFailure("Cholesky factorization of the covariance failed");
    return llt.matrixL();
}

Vector CovSpec::apply_sqrt(const Vector& v, bool inverse) const {
    if (v.size() != size()) throw DimMismatch("vector length does not match covariance size");
    if (kind_ == CovKind::Diagonal)
        return inverse ? Vector(v.array() / diag_.array().sqrt()) : Vector(v.array() * diag_.array().sqrt());
    const EigenDecomp& e = full_.eig();
    const Vector s = inverse ? Vector(e.values.array().rsqrt()) : Vector(e.values.array().sqrt());
    return e.vectors * (s.asDiagonal() * (e.vectors.transpose() * v));
}

bool operator==(const CovSpec& a, const CovSpec& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ == CovKind::Full) return a.full_ == b.full_;
    return a.diag_.size() == b.diag_.size() && a.diag_ == b.diag_;
}

WgParams::WgParams(SpdMat p_, Vector mu_, CovSpec sigma_) : p(std::move(p_)), mu(std::move(mu_)), sigma(std::move(sigma_)) {
    const Index n = tangent_dim(p.dim());
    if (p.dim() < 1) throw InvalidInput("wrapped Gaussian base point is empty");
    if (mu.size() != n)
        throw DimMismatch("mean has length " + std::to_string(mu.size()) + ", expected " + std::to_string(n));
    if (sigma.size() != n)
        throw DimMismatch("covariance has size " + std::to_string(sigma.size()) + ", expected " + std::to_string(n));
    if (!mu.allFinite()) throw InvalidInput("mean has non-finite entries");
}

EcGenerator EcGenerator::student_t(double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidInput("Student-t degrees of freedom must be positive");
    return {Tag::StudentT, nu};
}

double EcGenerator::log_g(double t, Index n) const {
    switch (tag) {
        case Tag::Gaussian: return -0.5 * t;
        case Tag::StudentT: return -0.5 * (dof + static_cast<double>(n)) * std::log1p(t / dof);
    }
    throw InvalidInput("unsupported density generator");
}

double EcGenerator::log_normalizer(Index n) const {
    const double nd = static_cast<double>(n);
    switch (tag) {
        case Tag::Gaussian: return -0.5 * nd * std::log(2.0 * std::numbers::pi);
        case Tag::StudentT:
            return std::lgamma(0.5 * (dof + nd)) - std::lgamma(0.5 * dof) - 0.5 * nd * std::log(dof * std::numbers::pi);
    }
    throw InvalidInput("unsupported density generator");
}

SpdMat wrap_point(const SpdMat& p, const Vector& t) {
    if (t.size() != tangent_dim(p.dim()))
        throw DimMismatch("coordinate vector of length " + std::to_string(t.size()) + " at base of dim " +
                          std::to_string(p.dim()));
    const SymMat e = spectral_fn(unvectorize_at_identity(t), SpectralFn::exp());
    return SpdMat(e.congruence(p.sqrt().matrix()));
}

Vector unwrap_point(const SpdMat& p, const SpdMat& x) { return unwrap_with_jacobian(p, x).coords; }

std::vector<SpdMat> sample(const WgParams& theta, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    return sample(theta, count, rng);
}

std::vector<SpdMat> sample(const WgParams& theta, std::size_t count, Rng& rng) {
    std::vector<SpdMat> out;
    if (count == 0) return out;
    out.reserve(count);
    const Matrix chol = theta.sigma.cholesky();
    const Matrix ps = theta.p.sqrt().matrix();
    const Index n = theta.tangent_size();
    for (std::size_t i = 0; i < count; ++i) {
        const Vector t = theta.mu + chol * rng.normal_vector(n);
        const SymMat e = spectral_fn(unvectorize_at_identity(t), SpectralFn::exp());
        out.emplace_back(e.congruence(ps));
    }
    return out;
}

double log_jacobian_det_identity(const Vector& eigenvalues) {
    Vector lam = eigenvalues;
    std::sort(lam.data(), lam.data() + lam.size(), std::greater<>());
    double s = 0.0;
    for (Index i = 0; i < lam.size(); ++i)
        for (Index j = i + 1; j < lam.size(); ++j) s += log_sinhc_factor(lam(i) - lam(j));
    return s;
}

double log_jacobian_det(const SpdMat& p, const TangentVec& u) {
    require_same_base(p, u);
    return log_jacobian_det_identity(eigh(u.vec().congruence(p.invsqrt().matrix())).values);
}

double jacobian_det(const SpdMat& p, const TangentVec& u) { return std::exp(log_jacobian_det(p, u)); }

UnwrapWithJacobian unwrap_with_jacobian(const Matrix& p_invsqrt, const SpdMat& x) {
    if (p_invsqrt.rows() != x.dim()) throw DimMismatch("point and base have different dimensions");
    const EigenDecomp e = eigh(x.sym().congruence(p_invsqrt));
    if (!(e.values.minCoeff() > 0.0)) throw DomainError("whitened point is not positive definite");
    const Vector l = e.values.array().log();
    return {vectorize_at_identity(SymMat::symmetrize(e.vectors * l.asDiagonal() * e.vectors.transpose())),
            log_jacobian_det_identity(l)};
}

UnwrapWithJacobian unwrap_with_jacobian(const SpdMat& p, const SpdMat& x) {
    require_same_dim(p, x);
    return unwrap_with_jacobian(p.invsqrt().matrix(), x);
}

double log_density_ec(const WgParams& theta, const EcGenerator& gen, const SpdMat& x) {
    const Index n = theta.tangent_size();
    const UnwrapWithJacobian u = unwrap_with_jacobian(theta.p, x);
    const double q = theta.sigma.mahalanobis_sq(u.coords - theta.mu);
    return gen.log_normalizer(n) - 0.5 * theta.sigma.logdet() + gen.log_g(q, n) - u.log_jacobian;
}

double log_density(const WgParams& theta, const SpdMat& x) {
    return log_density_ec(theta, EcGenerator::gaussian(), x);
}

double density(const WgParams& theta, const SpdMat& x) { return std::exp(log_density(theta, x)); }

WgParams translate_class(const WgParams& theta, double t) {
    if (t == 0.0) return theta;
    const Index d = theta.dim();
    Vector mu = theta.mu;
    for (Index k : diag_index_set(d)) mu(k) -= t;
    return {theta.p.scaled(std::exp(t)), std::move(mu), theta.sigma};
}

WgParams minimal_representative(const WgParams& theta) {
    const Index d = theta.dim();
    const double t = dot_nu(theta.mu, d) / static_cast<double>(d);
    // Treat a shift at rounding level as zero so the projection is idempotent.
    double scale = 0.0;
    for (Index k : diag_index_set(d)) scale = std::max(scale, std::abs(theta.mu(k)));
    if (std::abs(t) <= 4.0 * static_cast<double>(d) * std::numeric_limits<double>::epsilon() * scale) return theta;
    return translate_class(theta, t);
}

namespace transforms {

SpdMat congruence(const SpdMat& p, const SpdMat& x, bool inverse) {
    require_same_dim(p, x);
    const Matrix a = inverse ? p.sqrt().matrix() : p.invsqrt().matrix();
    return SpdMat(x.sym().congruence(a));
}

SpdMat tangent_translate(const SpdMat& p, const Vector& mu, const SpdMat& x, bool inverse) {
    const Vector v = unwrap_point(p, x);
    if (mu.size() != v.size()) throw DimMismatch("mean length does not match tangent dimension");
    return wrap_point(p, inverse ? Vector(v + mu) : Vector(v - mu));
}

SpdMat tangent_scale(const SpdMat& p, const CovSpec& sigma, const SpdMat& x, bool inverse) {
    return wrap_point(p, sigma.apply_sqrt(unwrap_point(p, x), !inverse));
}

}  // namespace transforms

SpdMat standardize_map(const WgParams& theta, const SpdMat& x, Direction dir) {
    require_same_dim(theta.p, x);
    if (dir == Direction::ToStandard) {
        SpdMat y = transforms::tangent_translate(theta.p, theta.mu, x);
        y = transforms::tangent_scale(theta.p, theta.sigma, y);
        return transforms::congruence(theta.p, y);
    }
    SpdMat y = transforms::congruence(theta.p, x, true);
    y = transforms::tangent_scale(theta.p, theta.sigma, y, true);
    return transforms::tangent_translate(theta.p, theta.mu, y, true);
}

SpdMat clt_statistic(std::span<const SpdMat> xs, const Vector& mu_hat, const SpdMat& base) {
    if (xs.empty()) throw InvalidInput("wrapped CLT statistic of an empty sample");
    const Index n = tangent_dim(base.dim());
    if (mu_hat.size() != n) throw DimMismatch("mean length does not match tangent dimension");
    const Matrix pis = base.invsqrt().matrix();
    Vector s = Vector::Zero(n);
    for (const auto& x : xs) s += unwrap_with_jacobian(pis, x).coords - mu_hat;
    return wrap_point(base, s / std::sqrt(static_cast<double>(xs.size())));
}

SpdMat clt_statistic(std::span<const SpdMat> xs, const Vector& mu_hat) {
    if (xs.empty()) throw InvalidInput("wrapped CLT statistic of an empty sample");
    return clt_statistic(xs, mu_hat, SpdMat::identity(xs.front().dim()));
}

SpdMat clt_statistic_power_form(std::span<const SpdMat> xs, const Vector& mu_hat) {
    if (xs.empty()) throw InvalidInput("wrapped CLT statistic of an empty sample");
    const SpdMat m_inv = SpdMat::exp_of(-unvectorize_at_identity(mu_hat));
    SpdMat acc = log_product(xs.front(), m_inv);
    for (std::size_t i = 1; i < xs.size(); ++i) acc = log_product(acc, log_product(xs[i], m_inv));
    return SpdMat(acc.pow(1.0 / std::sqrt(static_cast<double>(xs.size()))));
}

}  // namespace spdwg
