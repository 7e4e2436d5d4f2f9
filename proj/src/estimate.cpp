#include "spdwg/estimate.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace spdwg {

namespace {

// Fixed-order tree reduction splitting at the midpoint, so that the sum of a
// concatenation of two equal halves is exactly twice the sum of one half.
double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 2) return v.empty() ? 0.0 : (v.size() == 1 ? v[0] : v[0] + v[1]);
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

// Unwrapped coordinates (one column per point) and log-Jacobians at p.
struct TangentSample {
    Matrix v;
    Vector log_j;
};

TangentSample tangent_sample(const SpdMat& p, std::span<const SpdMat> data) {
    const Index n = tangent_dim(p.dim());
    const Matrix pis = p.invsqrt().matrix();
    TangentSample ts{Matrix(n, static_cast<Index>(data.size())), Vector(static_cast<Index>(data.size()))};
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].dim() != p.dim()) throw DimMismatch("data point " + std::to_string(i) + " has the wrong dimension");
        UnwrapWithJacobian u = unwrap_with_jacobian(pis, data[i]);
        ts.v.col(static_cast<Index>(i)) = u.coords;
        ts.log_j(static_cast<Index>(i)) = u.log_jacobian;
    }
    return ts;
}

Matrix scatter(const Matrix& v, const Vector& mu) {
    const Matrix c = v.colwise() - mu;
    return c * c.transpose() / static_cast<double>(v.cols());
}

CovSpec make_cov(const Matrix& raw, CovKind kind, const Vector& mu, bool regularize, bool* regularized) {
    const Index n = raw.rows();
    if (regularized) *regularized = false;
    if (kind == CovKind::Full) {
        try {
            return CovSpec::full(SpdMat(SymMat::symmetrize(raw)));
        } catch (const DomainError&) {
            if (!regularize) throw SingularCovariance("estimated covariance is singular", mu, raw);
        }
    } else {
        const Vector dg = raw.diagonal();
        if (dg.allFinite() && dg.minCoeff() > 1e-300 && dg.minCoeff() > 1e-12 * dg.maxCoeff())
            return CovSpec::diagonal(dg);
        if (!regularize) throw SingularCovariance("estimated diagonal covariance has zero entries", mu, raw);
    }
    double lambda = 1e-8 * raw.trace() / static_cast<double>(n);
    if (!(lambda > 0.0)) lambda = 1e-8;
    if (regularized) *regularized = true;
    if (kind == CovKind::Full)
        return CovSpec::full(SpdMat(SymMat::symmetrize(raw + lambda * Matrix::Identity(n, n))));
    return CovSpec::diagonal((raw.diagonal().array() + lambda).matrix());
}

void require_data(std::span<const SpdMat> data, std::size_t min_n, const char* what) {
    if (data.size() < min_n)
        throw InvalidInput(std::string(what) + " needs at least " + std::to_string(min_n) + " data points, got " +
                           std::to_string(data.size()));
    for (const auto& x : data) require_same_dim(data.front(), x);
}

// tr(Sigma^-1 S) for the covariance kinds
double trace_inv_times(const CovSpec& sigma, const Matrix& s) {
    if (!sigma.is_full()) return (s.diagonal().array() / sigma.diag().array()).sum();
    const EigenDecomp& e = sigma.full_matrix().eig();
    const Matrix t = e.vectors.transpose() * s * e.vectors;
    return (t.diagonal().array() / e.values.array()).sum();
}

double log2pi_term(Index n) { return 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi); }

SpdMat initial_base(std::span<const SpdMat> data, const MleOptions& opts, FitReport& rep) {
    if (opts.explicit_init) {
        if (opts.explicit_init->spd.empty()) throw InvalidInput("explicit initial point has no SPD factor");
        return opts.explicit_init->spd.front();
    }
    try {
        return karcher_mean(data);
    } catch (const NumericalFailure& e) {
        if (!e.last_iterate()) throw;
        rep.warnings.push_back(std::string("Karcher initialization did not converge; using last iterate: ") + e.what());
        return SpdMat(SymMat::symmetrize(*e.last_iterate()));
    }
}

}  // namespace

const char* to_string(MleStrategy s) noexcept { return s == MleStrategy::Profile ? "profile" : "joint"; }

MleStrategy mle_strategy_from_string(const std::string& s) {
    if (s == "profile") return MleStrategy::Profile;
    if (s == "joint") return MleStrategy::Joint;
    throw InvalidInput("unknown estimation strategy '" + s + "' (expected profile or joint)");
}

double neg_log_lik(const WgParams& theta, std::span<const SpdMat> data) {
    require_data(data, 1, "negative log-likelihood");
    require_same_dim(theta.p, data.front());
    const Index n = theta.tangent_size();
    const Matrix pis = theta.p.invsqrt().matrix();
    const double per_point = log2pi_term(n) + 0.5 * theta.sigma.logdet();
    std::vector<double> terms(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const UnwrapWithJacobian u = unwrap_with_jacobian(pis, data[i]);
        terms[i] = per_point + 0.5 * theta.sigma.mahalanobis_sq(u.coords - theta.mu) + u.log_jacobian;
    }
    return pairwise_sum(terms);
}

ClosedForm closed_form_mu_sigma(const SpdMat& p, std::span<const SpdMat> data, CovKind kind) {
    require_data(data, 1, "closed-form estimation");
    const TangentSample ts = tangent_sample(p, data);
    Vector mu = ts.v.rowwise().mean();
    CovSpec sigma = make_cov(scatter(ts.v, mu), kind, mu, false, nullptr);
    return {std::move(mu), std::move(sigma)};
}

ClosedForm closed_form_mu_sigma_regularized(const SpdMat& p, std::span<const SpdMat> data, CovKind kind,
                                            bool* regularized) {
    require_data(data, 1, "closed-form estimation");
    const TangentSample ts = tangent_sample(p, data);
    Vector mu = ts.v.rowwise().mean();
    CovSpec sigma = make_cov(scatter(ts.v, mu), kind, mu, true, regularized);
    return {std::move(mu), std::move(sigma)};
}

double profiled_cost(const SpdMat& p, std::span<const SpdMat> data, CovKind kind) {
    require_data(data, 1, "profiled likelihood");
    const TangentSample ts = tangent_sample(p, data);
    const Vector mu = ts.v.rowwise().mean();
    const Matrix s = scatter(ts.v, mu);
    const CovSpec sigma = make_cov(s, kind, mu, true, nullptr);
    return log2pi_term(mu.size()) + 0.5 * sigma.logdet() + 0.5 * trace_inv_times(sigma, s) + ts.log_j.mean();
}

ProductPoint to_product(const WgParams& theta) {
    ProductPoint x;
    x.spd.push_back(theta.p);
    x.euc = theta.mu;
    if (theta.sigma.is_full())
        x.spd.push_back(theta.sigma.full_matrix());
    else
        x.pos = theta.sigma.diag();
    return x;
}

WgParams from_product(const ProductPoint& x, CovKind kind) {
    if (kind == CovKind::Full) {
        if (x.spd.size() != 2) throw DimMismatch("full-covariance product point needs two SPD factors");
        return {x.spd[0], x.euc, CovSpec::full(x.spd[1])};
    }
    if (x.spd.size() != 1) throw DimMismatch("diagonal-covariance product point needs one SPD factor");
    return {x.spd[0], x.euc, CovSpec::diagonal(x.pos)};
}

MleResult fit_mle(std::span<const SpdMat> data, const MleOptions& opts) {
    require_data(data, 2, "maximum-likelihood estimation");
    if (!(opts.tol > 0.0)) throw InvalidInput("tolerance must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    const Index d = data.front().dim();
    const Index n = tangent_dim(d);
    const auto N = static_cast<double>(data.size());

    FitReport pre;
    if (opts.cov_kind == CovKind::Full && static_cast<Index>(data.size()) <= n)
        pre.warnings.push_back("full covariance with N = " + std::to_string(data.size()) + " <= n = " +
                               std::to_string(n) + "; the estimate will be regularized");
    const SpdMat p0 = initial_base(data, opts, pre);
    require_same_dim(p0, data.front());

    CgOptions cg;
    cg.tol = opts.tol;
    cg.max_iter = opts.max_iter;

    CgResult res;
    if (opts.strategy == MleStrategy::Profile) {
        ProductPoint init;
        init.spd.push_back(p0);
        const CostFn cost = [&](const ProductPoint& x) { return profiled_cost(x.spd[0], data, opts.cov_kind); };
        res = minimize_cg(cost, nullptr, init, cg);
    } else {
        ProductPoint init;
        if (opts.explicit_init && opts.explicit_init->euc.size() != 0) {
            init = *opts.explicit_init;
        } else {
            bool reg = false;
            const ClosedForm cf = closed_form_mu_sigma_regularized(p0, data, opts.cov_kind, &reg);
            init = to_product(WgParams(p0, cf.mu, cf.sigma));
        }
        const CovKind kind = opts.cov_kind;
        const CostFn cost = [&](const ProductPoint& x) { return neg_log_lik(from_product(x, kind), data) / N; };
        const GradFn grad = [&](const ProductPoint& x) {
            const WgParams theta = from_product(x, kind);
            ProductTangent g = ProductTangent::zeros_like(x);
            // SPD base by finite differences with (mu, Sigma) held fixed.
            ProductPoint sub;
            sub.spd.push_back(x.spd[0]);
            const CostFn sub_cost = [&](const ProductPoint& y) {
                return neg_log_lik(WgParams(y.spd[0], theta.mu, theta.sigma), data) / N;
            };
            g.spd[0] = finite_difference_gradient(sub_cost, sub, cg.fd_step).spd[0];
            // (mu, Sigma) in closed form.
            const TangentSample ts = tangent_sample(theta.p, data);
            const Vector r = ts.v.rowwise().mean() - theta.mu;
            const Matrix s = scatter(ts.v, theta.mu);
            if (kind == CovKind::Full) {
                const Matrix sinv = theta.sigma.full_matrix().inverse().matrix();
                g.euc = -sinv * r;
                g.spd[1] = SymMat::symmetrize(0.5 * sinv - 0.5 * sinv * s * sinv);
            } else {
                const Vector& sd = theta.sigma.diag();
                g.euc = -(r.array() / sd.array()).matrix();
                g.pos = (0.5 / sd.array() - 0.5 * s.diagonal().array() / sd.array().square()).matrix();
            }
            return g;
        };
        res = minimize_cg(cost, grad, init, cg);
    }

    MleResult out;
    out.report = std::move(res.report);
    out.report.warnings.insert(out.report.warnings.begin(), pre.warnings.begin(), pre.warnings.end());
    if (opts.strategy == MleStrategy::Profile) {
        bool reg = false;
        const SpdMat& p = res.point.spd[0];
        ClosedForm cf = closed_form_mu_sigma_regularized(p, data, opts.cov_kind, &reg);
        if (reg) out.report.warnings.push_back("estimated covariance was singular and has been regularized");
        out.theta = minimal_representative(WgParams(p, std::move(cf.mu), std::move(cf.sigma)));
    } else {
        out.theta = minimal_representative(from_product(res.point, opts.cov_kind));
    }
    out.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

WgParams fit_moments(std::span<const SpdMat> data, CovKind kind) {
    require_data(data, 2, "moment estimation");
    const SpdMat p = karcher_mean(data);
    ClosedForm cf = closed_form_mu_sigma(p, data, kind);
    return {p, Vector::Zero(cf.mu.size()), std::move(cf.sigma)};
}

}  // namespace spdwg
