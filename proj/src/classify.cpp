#include "spdwg/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace spdwg {

namespace {

Vector make_log_priors(const LabeledSpdDataset& data, bool uniform) {
    const auto counts = data.class_counts();
    Vector lp(data.n_classes);
    for (int k = 0; k < data.n_classes; ++k)
        lp(k) = uniform ? -std::log(static_cast<double>(data.n_classes))
                        : std::log(static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                                   static_cast<double>(data.size()));
    return lp;
}

void require_nonempty_classes(const LabeledSpdDataset& data) {
    if (data.size() == 0 || data.n_classes < 1) throw InvalidInput("empty training set");
    const auto counts = data.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k] == 0) throw InvalidInput("class " + std::to_string(k) + " has no training points");
}

SpdMat karcher_or_last(std::span<const SpdMat> xs, std::vector<std::string>& warnings) {
    try {
        return karcher_mean(xs);
    } catch (const NumericalFailure& e) {
        if (!e.last_iterate()) throw;
        warnings.push_back(std::string("Karcher mean: ") + e.what() + "; using last iterate");
        return SpdMat(SymMat::symmetrize(*e.last_iterate()));
    }
}

CovSpec cov_from_scatter(const Matrix& s, bool diag, std::vector<std::string>& warnings, const std::string& what) {
    const Index n = s.rows();
    const double lambda_raw = 1e-8 * s.trace() / static_cast<double>(n);
    const double lambda = lambda_raw > 0.0 ? lambda_raw : 1e-8;
    if (diag) {
        const Vector dg = s.diagonal();
        if (dg.minCoeff() > 1e-12 * dg.maxCoeff() && dg.minCoeff() > 1e-300) return CovSpec::diagonal(dg);
        warnings.push_back(what + ": singular covariance regularized");
        return CovSpec::diagonal((dg.array() + lambda).matrix());
    }
    try {
        return CovSpec::full(SpdMat(SymMat::symmetrize(s)));
    } catch (const DomainError&) {
        warnings.push_back(what + ": singular covariance regularized");
        return CovSpec::full(SpdMat(SymMat::symmetrize(s + lambda * Matrix::Identity(n, n))));
    }
}

// Unwrapped coordinates at p, one column per point.
Matrix unwrap_all(const SpdMat& p, std::span<const SpdMat> xs) {
    const Matrix pis = p.invsqrt().matrix();
    Matrix v(tangent_dim(p.dim()), static_cast<Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v.col(static_cast<Index>(i)) = unwrap_with_jacobian(pis, xs[i]).coords;
    return v;
}

Vector log_softmax(const Vector& s) {
    const double m = s.maxCoeff();
    const double lse = m + std::log((s.array() - m).exp().sum());
    return (s.array() - lse).matrix();
}

int argmax_first(const Vector& s) {
    int best = 0;
    for (Index k = 1; k < s.size(); ++k)
        if (s(k) > s(best)) best = static_cast<int>(k);
    return best;
}

void require_model_dim(const ClassifierModel& m, const SpdMat& x) {
    if (m.dim() != x.dim())
        throw DimMismatch("input of dim " + std::to_string(x.dim()) + " for a model of dim " + std::to_string(m.dim()));
}

Vector class_scores(const ClassifierModel& m, const SpdMat& x) {
    require_model_dim(m, x);
    const int K = m.n_classes();
    Vector s(K);
    if (const auto* mdm = std::get_if<MdmModel>(&m.model)) {
        for (int k = 0; k < K; ++k) {
            const double dk = dist(x, mdm->class_means[static_cast<std::size_t>(k)]);
            s(k) = -0.5 * dk * dk;
        }
        return s;
    }
    if (const auto* ts = std::get_if<TsdaModel>(&m.model)) {
        const Vector v = unwrap_point(ts->base, x);
        const double c = 0.5 * static_cast<double>(v.size()) * std::log(2.0 * std::numbers::pi);
        for (int k = 0; k < K; ++k) {
            const CovSpec& cov = ts->cov.size() == 1 ? ts->cov.front() : ts->cov[static_cast<std::size_t>(k)];
            s(k) = -c - 0.5 * cov.logdet() - 0.5 * cov.mahalanobis_sq(v - ts->class_mu[static_cast<std::size_t>(k)]) +
                   m.log_priors(k);
        }
        return s;
    }
    const auto& wda = std::get<WdaModel>(m.model);
    for (int k = 0; k < K; ++k) s(k) = log_density(wda.class_params[static_cast<std::size_t>(k)], x) + m.log_priors(k);
    return s;
}

// Per-class cost of the shared-covariance model with mu profiled out:
// mean over the class of 1/2 (v - vbar)^T Sigma^-1 (v - vbar) + log J.
double howda_class_cost(const SpdMat& p, std::span<const SpdMat> xs, const CovSpec& sigma) {
    const Matrix pis = p.invsqrt().matrix();
    const Index n = tangent_dim(p.dim());
    Matrix v(n, static_cast<Index>(xs.size()));
    double lj = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const UnwrapWithJacobian u = unwrap_with_jacobian(pis, xs[i]);
        v.col(static_cast<Index>(i)) = u.coords;
        lj += u.log_jacobian;
    }
    const Vector mu = v.rowwise().mean();
    double q = 0.0;
    for (Index i = 0; i < v.cols(); ++i) q += sigma.mahalanobis_sq(v.col(i) - mu);
    return (0.5 * q + lj) / static_cast<double>(xs.size());
}

}  // namespace

LabeledSpdDataset::LabeledSpdDataset(std::vector<SpdMat> x_, std::vector<int> labels_, int n_classes_)
    : x(std::move(x_)), labels(std::move(labels_)), n_classes(n_classes_) {
    if (x.size() != labels.size()) throw InvalidInput("dataset has a different number of matrices and labels");
    if (x.empty()) throw InvalidInput("dataset is empty");
    dim = x.front().dim();
    int max_label = -1;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].dim() != dim)
            throw DimMismatch("record " + std::to_string(i) + " has dim " + std::to_string(x[i].dim()) + ", expected " +
                              std::to_string(dim));
        if (labels[i] < 0) throw InvalidInput("record " + std::to_string(i) + " has a negative label");
        max_label = std::max(max_label, labels[i]);
    }
    if (n_classes == 0) n_classes = max_label + 1;
    if (max_label >= n_classes)
        throw InvalidInput("label " + std::to_string(max_label) + " out of range for " + std::to_string(n_classes) +
                           " classes");
}

std::vector<std::size_t> LabeledSpdDataset::class_counts() const {
    std::vector<std::size_t> c(static_cast<std::size_t>(n_classes), 0);
    for (int l : labels) ++c[static_cast<std::size_t>(l)];
    return c;
}

std::vector<SpdMat> LabeledSpdDataset::class_points(int k) const {
    std::vector<SpdMat> out;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (labels[i] == k) out.push_back(x[i]);
    return out;
}

LabeledSpdDataset LabeledSpdDataset::subset(const std::vector<std::size_t>& idx) const {
    std::vector<SpdMat> xs;
    std::vector<int> ls;
    xs.reserve(idx.size());
    ls.reserve(idx.size());
    for (std::size_t i : idx) {
        xs.push_back(x.at(i));
        ls.push_back(labels.at(i));
    }
    return LabeledSpdDataset(std::move(xs), std::move(ls), n_classes);
}

Index ClassifierModel::dim() const {
    if (const auto* m = std::get_if<MdmModel>(&model)) return m->class_means.empty() ? 0 : m->class_means.front().dim();
    if (const auto* t = std::get_if<TsdaModel>(&model)) return t->base.dim();
    const auto& w = std::get<WdaModel>(model);
    return w.class_params.empty() ? 0 : w.class_params.front().dim();
}

ClassifierModel fit_mdm(const LabeledSpdDataset& data, const ClassifierOptions& opts) {
    require_nonempty_classes(data);
    ClassifierModel m;
    MdmModel mdm;
    for (int k = 0; k < data.n_classes; ++k) mdm.class_means.push_back(karcher_or_last(data.class_points(k), m.warnings));
    m.model = std::move(mdm);
    m.log_priors = make_log_priors(data, opts.uniform_priors);
    return m;
}

ClassifierModel fit_tsda(const LabeledSpdDataset& data, TsdaKind kind, bool diag, const ClassifierOptions& opts) {
    require_nonempty_classes(data);
    ClassifierModel m;
    TsdaModel ts;
    ts.kind = kind;
    ts.diag = diag;
    ts.base = karcher_or_last(data.x, m.warnings);
    const Matrix v = unwrap_all(ts.base, data.x);
    const Index n = v.rows();
    const auto counts = data.class_counts();

    std::vector<Vector> sums(static_cast<std::size_t>(data.n_classes), Vector::Zero(n));
    for (std::size_t i = 0; i < data.size(); ++i) sums[static_cast<std::size_t>(data.labels[i])] += v.col(static_cast<Index>(i));
    for (int k = 0; k < data.n_classes; ++k)
        ts.class_mu.push_back(sums[static_cast<std::size_t>(k)] / static_cast<double>(counts[static_cast<std::size_t>(k)]));

    std::vector<Matrix> scat(static_cast<std::size_t>(data.n_classes), Matrix::Zero(n, n));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto k = static_cast<std::size_t>(data.labels[i]);
        const Vector r = v.col(static_cast<Index>(i)) - ts.class_mu[k];
        scat[k] += r * r.transpose();
    }
    if (kind == TsdaKind::Lda) {
        Matrix pooled = Matrix::Zero(n, n);
        for (const auto& s : scat) pooled += s;
        pooled /= static_cast<double>(data.size());
        ts.cov.push_back(cov_from_scatter(pooled, diag, m.warnings, "pooled covariance"));
    } else {
        for (int k = 0; k < data.n_classes; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            ts.cov.push_back(cov_from_scatter(scat[kk] / static_cast<double>(counts[kk]), diag, m.warnings,
                                              "class " + std::to_string(k) + " covariance"));
        }
    }
    m.model = std::move(ts);
    m.log_priors = make_log_priors(data, opts.uniform_priors);
    return m;
}

double wda_joint_cost(const WdaModel& model, const LabeledSpdDataset& data) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        s -= log_density(model.class_params.at(static_cast<std::size_t>(data.labels[i])), data.x[i]);
    return s / static_cast<double>(data.size());
}

ClassifierModel fit_wda(const LabeledSpdDataset& data, bool shared_sigma, const ClassifierOptions& opts) {
    require_nonempty_classes(data);
    ClassifierModel m;
    WdaModel wda;
    wda.shared_sigma = shared_sigma;
    const int K = data.n_classes;
    const CovKind kind = opts.mle.cov_kind;
    const bool diag = kind == CovKind::Diagonal;

    std::vector<std::vector<SpdMat>> classes;
    for (int k = 0; k < K; ++k) classes.push_back(data.class_points(k));

    if (!shared_sigma) {
        for (int k = 0; k < K; ++k) {
            try {
                MleResult r = fit_mle(classes[static_cast<std::size_t>(k)], opts.mle);
                for (auto& w : r.report.warnings) m.warnings.push_back("class " + std::to_string(k) + ": " + w);
                wda.class_params.push_back(std::move(r.theta));
            } catch (const Error& e) {
                throw NumericalFailure("class " + std::to_string(k) + ": " + e.what());
            }
        }
        m.model = std::move(wda);
        m.log_priors = make_log_priors(data, opts.uniform_priors);
        return m;
    }

    // Block-coordinate descent: class bases with their means profiled out
    // given Sigma, then the pooled covariance of the residuals.
    const Index n = tangent_dim(data.dim);
    std::vector<SpdMat> bases;
    for (int k = 0; k < K; ++k) {
        const auto& xs = classes[static_cast<std::size_t>(k)];
        if (opts.mle.explicit_init && static_cast<std::size_t>(k) < opts.mle.explicit_init->spd.size())
            bases.push_back(opts.mle.explicit_init->spd[static_cast<std::size_t>(k)]);
        else
            bases.push_back(karcher_or_last(xs, m.warnings));
    }

    auto pooled_cov = [&](std::vector<Vector>& mus) {
        Matrix s = Matrix::Zero(n, n);
        mus.clear();
        for (int k = 0; k < K; ++k) {
            const Matrix v = unwrap_all(bases[static_cast<std::size_t>(k)], classes[static_cast<std::size_t>(k)]);
            const Vector mu = v.rowwise().mean();
            const Matrix c = v.colwise() - mu;
            s += c * c.transpose();
            mus.push_back(mu);
        }
        s /= static_cast<double>(data.size());
        return cov_from_scatter(s, diag, m.warnings, "shared covariance");
    };
    auto assemble = [&](const std::vector<Vector>& mus, const CovSpec& sigma) {
        WdaModel w;
        w.shared_sigma = true;
        for (int k = 0; k < K; ++k)
            w.class_params.emplace_back(bases[static_cast<std::size_t>(k)], mus[static_cast<std::size_t>(k)], sigma);
        return w;
    };

    std::vector<Vector> mus;
    CovSpec sigma = pooled_cov(mus);
    double cost = wda_joint_cost(assemble(mus, sigma), data);
    m.fit_cost_trace.push_back(cost);

    CgOptions cg;
    cg.tol = opts.mle.tol;
    cg.max_iter = opts.mle.max_iter;
    for (int round = 0; round < opts.max_rounds; ++round) {
        bool stationary = true;
        for (int k = 0; k < K; ++k) {
            const auto& xs = classes[static_cast<std::size_t>(k)];
            ProductPoint init;
            init.spd.push_back(bases[static_cast<std::size_t>(k)]);
            const CostFn f = [&](const ProductPoint& x) { return howda_class_cost(x.spd[0], xs, sigma); };
            CgResult r;
            try {
                r = minimize_cg(f, nullptr, init, cg);
            } catch (const NumericalFailure& e) {
                throw NumericalFailure("class " + std::to_string(k) + ": " + e.what());
            }
            if (r.report.iterations > 0) stationary = false;
            bases[static_cast<std::size_t>(k)] = r.point.spd[0];
        }
        const CovSpec new_sigma = pooled_cov(mus);
        const double new_cost = wda_joint_cost(assemble(mus, new_sigma), data);
        // Accept the covariance step only if it does not increase the cost;
        // the pooled covariance is the exact minimizer, so this guards rounding.
        if (new_cost <= cost) sigma = new_sigma;
        const double prev = cost;
        cost = std::min(new_cost, cost);
        m.fit_cost_trace.push_back(cost);
        if (stationary || prev - cost <= 1e-12 * std::max(1.0, std::abs(prev))) break;
    }

    std::vector<Vector> final_mus;
    for (int k = 0; k < K; ++k)
        final_mus.push_back(unwrap_all(bases[static_cast<std::size_t>(k)], classes[static_cast<std::size_t>(k)]).rowwise().mean());
    wda = assemble(final_mus, sigma);
    for (auto& th : wda.class_params) th = minimal_representative(th);
    m.model = std::move(wda);
    m.log_priors = make_log_priors(data, opts.uniform_priors);
    return m;
}

ClassifierModel wda_from_tsda(const ClassifierModel& tsda) {
    const auto* ts = std::get_if<TsdaModel>(&tsda.model);
    if (!ts) throw InvalidInput("model is not a tangent-space discriminant model");
    ClassifierModel m;
    WdaModel w;
    w.shared_sigma = ts->kind == TsdaKind::Lda;
    for (std::size_t k = 0; k < ts->class_mu.size(); ++k)
        w.class_params.emplace_back(ts->base, ts->class_mu[k], ts->cov.size() == 1 ? ts->cov.front() : ts->cov[k]);
    m.model = std::move(w);
    m.log_priors = tsda.log_priors;
    return m;
}

Vector predict_log_proba(const ClassifierModel& model, const SpdMat& x) { return log_softmax(class_scores(model, x)); }

int predict(const ClassifierModel& model, const SpdMat& x) { return argmax_first(class_scores(model, x)); }

const char* to_string(ClassifierKind k) noexcept {
    switch (k) {
        case ClassifierKind::Mdm: return "mdm";
        case ClassifierKind::TsLda: return "tslda";
        case ClassifierKind::TsQda: return "tsqda";
        case ClassifierKind::HoWda: return "howda";
        case ClassifierKind::HeWda: return "hewda";
    }
    return "?";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "mdm") return ClassifierKind::Mdm;
    if (s == "tslda") return ClassifierKind::TsLda;
    if (s == "tsqda") return ClassifierKind::TsQda;
    if (s == "howda") return ClassifierKind::HoWda;
    if (s == "hewda") return ClassifierKind::HeWda;
    throw InvalidInput("unknown classifier '" + s + "' (expected mdm, tslda, tsqda, howda or hewda)");
}

std::string ClassifierSpec::name() const { return std::string(to_string(kind)) + (diag ? "-diag" : ""); }

ClassifierSpec ClassifierSpec::parse(const std::string& s) {
    ClassifierSpec spec;
    std::string base = s;
    for (const char* suffix : {"-diag", ":diag"}) {
        const std::string suf(suffix);
        if (base.size() > suf.size() && base.compare(base.size() - suf.size(), suf.size(), suf) == 0) {
            base.erase(base.size() - suf.size());
            spec.diag = true;
        }
    }
    spec.kind = classifier_kind_from_string(base);
    if (spec.diag && spec.kind == ClassifierKind::Mdm) throw InvalidInput("mdm has no diagonal variant");
    return spec;
}

ClassifierModel fit_classifier(const LabeledSpdDataset& data, const ClassifierSpec& spec, const ClassifierOptions& opts) {
    switch (spec.kind) {
        case ClassifierKind::Mdm: return fit_mdm(data, opts);
        case ClassifierKind::TsLda: return fit_tsda(data, TsdaKind::Lda, spec.diag, opts);
        case ClassifierKind::TsQda: return fit_tsda(data, TsdaKind::Qda, spec.diag, opts);
        case ClassifierKind::HoWda:
        case ClassifierKind::HeWda: {
            ClassifierOptions o = opts;
            if (spec.diag) o.mle.cov_kind = CovKind::Diagonal;
            return fit_wda(data, spec.kind == ClassifierKind::HoWda, o);
        }
    }
    throw InvalidInput("unknown classifier");
}

}  // namespace spdwg
