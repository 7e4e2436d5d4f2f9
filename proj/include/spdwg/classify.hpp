#pragma once

// Maximum-likelihood classifiers on SPD matrices: minimum distance to mean,
// tangent-space LDA/QDA at the global mean, and homogeneous/heterogeneous
// wrapped discriminant analysis.

#include "spdwg/estimate.hpp"

#include <string>
#include <variant>
#include <vector>

namespace spdwg {

struct LabeledSpdDataset {
    std::vector<SpdMat> x;
    std::vector<int> labels;
    Index dim = 0;
    int n_classes = 0;

    LabeledSpdDataset() = default;
    /// Validates shared dimension and labels in [0, n_classes). n_classes = 0
    /// means max label + 1.
    LabeledSpdDataset(std::vector<SpdMat> x, std::vector<int> labels, int n_classes = 0);

    std::size_t size() const noexcept { return x.size(); }
    std::vector<std::size_t> class_counts() const;
    /// Points of class k, in dataset order.
    std::vector<SpdMat> class_points(int k) const;
    LabeledSpdDataset subset(const std::vector<std::size_t>& idx) const;
};

struct MdmModel {
    std::vector<SpdMat> class_means;
};

enum class TsdaKind { Lda, Qda };

struct TsdaModel {
    SpdMat base;
    std::vector<Vector> class_mu;
    /// One entry (lda) or one per class (qda).
    std::vector<CovSpec> cov;
    TsdaKind kind = TsdaKind::Lda;
    bool diag = false;
};

struct WdaModel {
    std::vector<WgParams> class_params;
    bool shared_sigma = false;
};

struct ClassifierModel {
    std::variant<MdmModel, TsdaModel, WdaModel> model;
    Vector log_priors;
    std::vector<std::string> warnings;
    /// Joint cost after each alternation round (shared-covariance wrapped
    /// model only); diagnostic, not serialized.
    std::vector<double> fit_cost_trace;

    int n_classes() const noexcept { return static_cast<int>(log_priors.size()); }
    Index dim() const;
};

struct ClassifierOptions {
    bool uniform_priors = false;
    MleOptions mle;
    /// Alternation rounds for the shared-covariance wrapped model.
    int max_rounds = 50;
};

ClassifierModel fit_mdm(const LabeledSpdDataset& data, const ClassifierOptions& opts = {});
ClassifierModel fit_tsda(const LabeledSpdDataset& data, TsdaKind kind, bool diag, const ClassifierOptions& opts = {});
ClassifierModel fit_wda(const LabeledSpdDataset& data, bool shared_sigma, const ClassifierOptions& opts = {});

/// Wrapped model with every class based at the tangent-space model's base
/// point; its decisions coincide with the tangent-space model's.
ClassifierModel wda_from_tsda(const ClassifierModel& tsda);

/// Normalized class log-probabilities (log-softmax of the class scores).
/// MDM scores are -dist^2 / 2; tangent-space and wrapped scores are class
/// log-likelihoods plus log-priors.
Vector predict_log_proba(const ClassifierModel& model, const SpdMat& x);
/// Argmax of the scores, ties to the smallest label. MDM returns the class
/// with the nearest mean.
int predict(const ClassifierModel& model, const SpdMat& x);

/// Joint mean negative log-likelihood of the shared-covariance wrapped model
/// over the dataset; non-increasing across alternation rounds.
double wda_joint_cost(const WdaModel& model, const LabeledSpdDataset& data);

enum class ClassifierKind { Mdm, TsLda, TsQda, HoWda, HeWda };
const char* to_string(ClassifierKind k) noexcept;
ClassifierKind classifier_kind_from_string(const std::string& s);

/// A classifier name plus its diagonal-covariance flag ("tslda", "tsqda:diag", ...).
struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::Mdm;
    bool diag = false;
    std::string name() const;
    static ClassifierSpec parse(const std::string& s);
};

ClassifierModel fit_classifier(const LabeledSpdDataset& data, const ClassifierSpec& spec,
                               const ClassifierOptions& opts = {});

}  // namespace spdwg
