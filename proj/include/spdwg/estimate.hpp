#pragma once

// Parameter estimation for wrapped Gaussians.

#include "spdwg/riemopt.hpp"
#include "spdwg/wgauss.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace spdwg {

enum class MleStrategy { Profile, Joint };

const char* to_string(MleStrategy s) noexcept;
MleStrategy mle_strategy_from_string(const std::string& s);

struct MleOptions {
    CovKind cov_kind = CovKind::Full;
    double tol = 1e-6;
    int max_iter = 5000;
    /// Starting point. Unset: Karcher mean of the data for p, closed-form
    /// (mu, Sigma) at that p. For the profile strategy only spd[0] is read.
    std::optional<ProductPoint> explicit_init;
    MleStrategy strategy = MleStrategy::Profile;
    bool deterministic = true;
    std::uint64_t seed = 0;
};

/// -sum_i log f_theta(x_i)
double neg_log_lik(const WgParams& theta, std::span<const SpdMat> data);

struct ClosedForm {
    Vector mu;
    CovSpec sigma;
};

/// Conditional MLE of (mu, Sigma) given p: sample mean and biased (1/N)
/// covariance of Vect_p(Log_p x_i). Throws SingularCovariance (carrying mu
/// and the raw covariance) when Sigma-hat is not positive definite.
ClosedForm closed_form_mu_sigma(const SpdMat& p, std::span<const SpdMat> data, CovKind kind);

/// Same, but a singular covariance is regularized by +lambda I with
/// lambda = 1e-8 tr(Sigma)/n; `regularized` reports whether that happened.
ClosedForm closed_form_mu_sigma_regularized(const SpdMat& p, std::span<const SpdMat> data, CovKind kind,
                                            bool* regularized = nullptr);

/// Mean negative log-likelihood at (p, mu-hat(p), Sigma-hat(p)).
double profiled_cost(const SpdMat& p, std::span<const SpdMat> data, CovKind kind);

/// Point of the product manifold holding theta (see ProductPoint).
ProductPoint to_product(const WgParams& theta);
WgParams from_product(const ProductPoint& x, CovKind kind);

struct MleResult {
    WgParams theta;  ///< always the minimal representative
    FitReport report;
};

/// Maximum-likelihood fit by Riemannian conjugate gradient. The report's
/// costs are per-sample means of the negative log-likelihood.
MleResult fit_mle(std::span<const SpdMat> data, const MleOptions& opts = {});

/// Moment estimator, valid when mu* = 0 is known a priori: Karcher mean,
/// mu = 0, closed-form covariance at the mean.
WgParams fit_moments(std::span<const SpdMat> data, CovKind kind);

}  // namespace spdwg
