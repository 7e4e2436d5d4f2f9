#include "spdwg/riemopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace spdwg {

namespace {

double safe_cost(const CostFn& cost, const ProductPoint& x) {
    try {
        return cost(x);
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const SingularCovariance&) {
        return std::numeric_limits<double>::infinity();
    }
}

ProductPoint with_spd(const ProductPoint& x, std::size_t k, SpdMat p) {
    ProductPoint y = x;
    y.spd[k] = std::move(p);
    return y;
}

}  // namespace

ProductTangent ProductTangent::zeros_like(const ProductPoint& x) {
    ProductTangent t;
    t.spd.reserve(x.spd.size());
    for (const auto& p : x.spd) t.spd.push_back(SymMat::zero(p.dim()));
    t.euc = Vector::Zero(x.euc.size());
    t.pos = Vector::Zero(x.pos.size());
    return t;
}

Index ProductTangent::total_dim() const {
    Index n = euc.size() + pos.size();
    for (const auto& s : spd) n += tangent_dim(s.dim());
    return n;
}

ProductTangent ProductTangent::operator+(const ProductTangent& o) const {
    if (spd.size() != o.spd.size() || euc.size() != o.euc.size() || pos.size() != o.pos.size())
        throw DimMismatch("product tangent shapes differ");
    ProductTangent r;
    r.spd.reserve(spd.size());
    for (std::size_t k = 0; k < spd.size(); ++k) r.spd.push_back(spd[k] + o.spd[k]);
    r.euc = euc + o.euc;
    r.pos = pos + o.pos;
    return r;
}

ProductTangent ProductTangent::operator*(double s) const {
    ProductTangent r;
    r.spd.reserve(spd.size());
    for (const auto& a : spd) r.spd.push_back(a * s);
    r.euc = s * euc;
    r.pos = s * pos;
    return r;
}

Index total_dim(const ProductPoint& x) {
    Index n = x.euc.size() + x.pos.size();
    for (const auto& p : x.spd) n += tangent_dim(p.dim());
    return n;
}

void require_same_shape(const ProductPoint& x, const ProductTangent& v) {
    bool ok = x.spd.size() == v.spd.size() && x.euc.size() == v.euc.size() && x.pos.size() == v.pos.size();
    for (std::size_t k = 0; ok && k < x.spd.size(); ++k) ok = x.spd[k].dim() == v.spd[k].dim();
    if (!ok) throw DimMismatch("product tangent does not match the product point's shape");
}

double inner(const ProductPoint& x, const ProductTangent& a, const ProductTangent& b) {
    require_same_shape(x, a);
    require_same_shape(x, b);
    double s = 0.0;
    for (std::size_t k = 0; k < x.spd.size(); ++k) {
        const Matrix pinv = x.spd[k].inverse().matrix();
        s += (pinv * a.spd[k].matrix() * pinv * b.spd[k].matrix()).trace();
    }
    s += a.euc.dot(b.euc);
    s += (a.pos.array() * b.pos.array() / x.pos.array().square()).sum();
    return s;
}

double norm(const ProductPoint& x, const ProductTangent& a) { return std::sqrt(std::max(inner(x, a, a), 0.0)); }

ProductTangent riemannian_gradient(const ProductPoint& x, const ProductTangent& g) {
    require_same_shape(x, g);
    ProductTangent r;
    r.spd.reserve(x.spd.size());
    for (std::size_t k = 0; k < x.spd.size(); ++k) r.spd.push_back(g.spd[k].congruence(x.spd[k].matrix()));
    r.euc = g.euc;
    r.pos = (x.pos.array().square() * g.pos.array()).matrix();
    return r;
}

ProductPoint retract(const ProductPoint& x, const ProductTangent& v, double step) {
    require_same_shape(x, v);
    if (step == 0.0) return x;
    ProductPoint y;
    y.spd.reserve(x.spd.size());
    for (std::size_t k = 0; k < x.spd.size(); ++k)
        y.spd.push_back(exp_map(x.spd[k], TangentVec(x.spd[k], v.spd[k] * step)));
    y.euc = x.euc + step * v.euc;
    y.pos = (x.pos.array() * (step * v.pos.array() / x.pos.array()).exp()).matrix();
    return y;
}

ProductTangent transport(const ProductPoint& from, const ProductPoint& to, const ProductTangent& v) {
    require_same_shape(from, v);
    ProductTangent r;
    r.spd.reserve(v.spd.size());
    for (std::size_t k = 0; k < v.spd.size(); ++k)
        r.spd.push_back(ptransport(to.spd[k], TangentVec(from.spd[k], v.spd[k])).vec());
    r.euc = v.euc;
    r.pos = (v.pos.array() * to.pos.array() / from.pos.array()).matrix();
    return r;
}

ProductTangent finite_difference_gradient(const CostFn& cost, const ProductPoint& x, double h) {
    ProductTangent g = ProductTangent::zeros_like(x);
    const double inv2h = 0.5 / h;
    for (std::size_t k = 0; k < x.spd.size(); ++k) {
        const SpdMat& p = x.spd[k];
        const auto basis = tangent_basis(p);
        Matrix riem = Matrix::Zero(p.dim(), p.dim());
        for (const auto& e : basis) {
            const double fp = cost(with_spd(x, k, exp_map(p, e * h)));
            const double fm = cost(with_spd(x, k, exp_map(p, e * -h)));
            riem += (fp - fm) * inv2h * e.vec().matrix();
        }
        // Riemannian gradient R = p G p, so G = p^-1 R p^-1.
        g.spd[k] = SymMat::symmetrize(riem).congruence(p.inverse().matrix());
    }
    for (Index i = 0; i < x.euc.size(); ++i) {
        const double hi = h * std::max(1.0, std::abs(x.euc(i)));
        ProductPoint xp = x, xm = x;
        xp.euc(i) += hi;
        xm.euc(i) -= hi;
        g.euc(i) = (cost(xp) - cost(xm)) / (2.0 * hi);
    }
    for (Index i = 0; i < x.pos.size(); ++i) {
        ProductPoint xp = x, xm = x;
        xp.pos(i) *= std::exp(h);
        xm.pos(i) *= std::exp(-h);
        // derivative in log coordinates, then chain rule back to x_i
        g.pos(i) = (cost(xp) - cost(xm)) * inv2h / x.pos(i);
    }
    return g;
}

CgResult minimize_cg(const CostFn& cost, const GradFn& grad, const ProductPoint& init, const CgOptions& opts) {
    if (!(opts.tol > 0.0)) throw InvalidInput("optimizer tolerance must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    const GradFn egrad = grad ? grad : GradFn([&](const ProductPoint& x) {
        return finite_difference_gradient(cost, x, opts.fd_step);
    });
    const int restart_every = opts.restart_every > 0 ? opts.restart_every : std::max<int>(1, static_cast<int>(total_dim(init)));

    CgResult res;
    FitReport& rep = res.report;
    ProductPoint x = init;
    double f = safe_cost(cost, x);
    if (!std::isfinite(f)) throw OptimizationFailure("cost is not finite at the initial point", x, rep);
    rep.cost_trace.push_back(f);

    ProductTangent g = riemannian_gradient(x, egrad(x));
    double gn = norm(x, g);
    ProductTangent dir = -g;
    double alpha0 = std::min(1.0, 1.0 / std::max(gn, 1e-300));
    rep.stop_reason = "max_iter";

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        if (gn <= opts.tol) {
            rep.stop_reason = "gradient";
            break;
        }
        double slope = inner(x, g, dir);
        // Restart unless the direction gives sufficient descent; a conjugate
        // direction can collapse towards zero when the gradient keeps its
        // direction between iterates.
        if (!(slope <= -1e-3 * gn * gn)) {
            dir = -g;
            slope = -gn * gn;
        }

        double alpha = alpha0;
        bool accepted = false;
        bool saw_finite = false;
        ProductPoint xn;
        double fn = 0.0;
        for (int b = 0; b < opts.max_backtracks; ++b, alpha *= 0.5) {
            try {
                xn = retract(x, dir, alpha);
            } catch (const DomainError&) {
                continue;
            }
            fn = safe_cost(cost, xn);
            if (!std::isfinite(fn)) continue;
            saw_finite = true;
            if (fn <= f + opts.armijo_c * alpha * slope) {
                accepted = true;
                break;
            }
        }
        if (accepted) {
            // Minimizer of the quadratic through f, the slope and fn; tried
            // when it lies well inside the accepted step.
            const double curv = (fn - f - slope * alpha) / (alpha * alpha);
            if (curv > 0.0) {
                const double aq = -slope / (2.0 * curv);
                if (aq > 0.0 && aq < 0.9 * alpha) {
                    try {
                        ProductPoint xq = retract(x, dir, aq);
                        const double fq = safe_cost(cost, xq);
                        if (fq < fn) {
                            xn = std::move(xq);
                            fn = fq;
                            alpha = aq;
                        }
                    } catch (const DomainError&) {
                    }
                }
            }
        }
        if (!accepted) {
            if (!saw_finite) {
                rep.iterations = it;
                rep.final_cost = f;
                rep.grad_norm = gn;
                rep.wall_time = elapsed();
                rep.stop_reason = "non-finite cost";
                throw OptimizationFailure("line search produced only non-finite costs", x, rep);
            }
            rep.stop_reason = "line search";
            break;
        }

        ProductTangent gnew = riemannian_gradient(xn, egrad(xn));
        const ProductTangent tg = transport(x, xn, g);
        const ProductTangent td = transport(x, xn, dir);
        const ProductTangent y = gnew + (-tg);
        double beta = 0.0;
        if ((it + 1) % restart_every != 0) {
            const double denom = inner(xn, td, y);
            if (denom != 0.0 && std::isfinite(denom)) beta = std::max(0.0, inner(xn, gnew, y) / denom);
        }
        dir = -gnew + td * beta;
        alpha0 = 2.0 * alpha;

        x = std::move(xn);
        f = fn;
        g = std::move(gnew);
        gn = norm(x, g);
        rep.cost_trace.push_back(f);
    }
    if (gn <= opts.tol) rep.stop_reason = "gradient";

    rep.iterations = it;
    rep.final_cost = f;
    rep.grad_norm = gn;
    rep.converged = gn <= opts.tol;
    rep.wall_time = elapsed();
    res.point = std::move(x);
    return res;
}

}  // namespace spdwg
