#pragma once

// Synthetic generators, experiment configuration, the estimation-error
// experiment, stratified cross-validation and CSV post-processing.

#include "spdwg/classify.hpp"
#include "spdwg/random.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spdwg::harness {

/// exp((cI + sA)^T (cI + sA)) with A standard normal (row-major draw).
SpdMat random_spd(Index d, double c, double s, std::uint64_t seed);
SpdMat random_spd(Index d, double c, double s, Rng& rng);

/// p = random_spd(d, 0.1, 1); mu uniform in [0, 0.1]; Sigma =
/// random_spd(n, 0.01, 0.02) (full) or uniform diagonal in (0, 1] (diag).
/// p and mu do not depend on the kind, so full and diagonal generators with
/// the same seed share them. Returned as the minimal representative.
WgParams random_wg_params(Index d, CovKind kind, std::uint64_t seed);
WgParams random_wg_params(Index d, CovKind kind, Rng& rng);

/// Flat key = value text with [sections]; '#' and ';' start comments. Keys
/// before the first section live in section "".
class Config {
public:
    Config() = default;
    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    void set(const std::string& section, const std::string& key, std::string value);
    const std::map<std::string, std::string>& section(const std::string& name) const;
    std::vector<std::string> sections() const;

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

std::vector<std::string> split_list(const std::string& s);
long long parse_int(const std::string& s, const std::string& what);
double parse_real(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);

struct ResultRow {
    std::string experiment;
    std::string model;  ///< classifier name or covariance kind
    std::uint64_t seed = 0;
    Index d = 0;
    long long n = 0;
    int fold = -1;  ///< -1: not a per-fold row
    std::string metric;
    double value = 0.0;
    double wall_time = 0.0;
    bool failed = false;
};

struct MleCurveConfig {
    std::vector<Index> dims{2};
    std::vector<long long> n_grid{100, 1000, 10000};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<CovKind> cov_kinds{CovKind::Full};
    MleStrategy strategy = MleStrategy::Profile;
    double tol = 1e-6;
    int max_iter = 5000;
    int threads = 1;
    bool deterministic = false;
    /// Relative eigenvalue floor for SPD checks during the run.
    std::optional<double> eps_pd;
};

/// Reads section [mle_curve] (keys: dims, n_grid, seeds, cov, strategy, tol,
/// max_iter, eps_pd) and the global threads/deterministic keys.
MleCurveConfig mle_curve_config(const Config& cfg);

/// Metrics per cell: dist_p (AIRM distance of bases), err_mu (Euclidean),
/// dist_sigma (AIRM distance of covariances), all between minimal
/// representatives. Failed cells yield NaN rows flagged `failed`. Rows are
/// sorted by (d, cov, N, seed, metric).
std::vector<ResultRow> run_mle_curve(const MleCurveConfig& cfg);
std::string mle_curve_csv(const std::vector<ResultRow>& rows);

/// Fold index per point. Each class is shuffled and dealt round-robin with a
/// running offset, so every fold holds each class to within one sample.
/// k == N gives leave-one-out. Otherwise each class needs >= k members.
std::vector<int> stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed);

struct CvConfig {
    std::vector<ClassifierSpec> specs;
    int k = 5;
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    ClassifierOptions options;
};

/// Per-fold accuracy rows plus accuracy_mean / accuracy_std (sample std)
/// rows per classifier, sorted by (model, fold, metric).
std::vector<ResultRow> run_cv(const LabeledSpdDataset& data, const CvConfig& cfg);
std::string cv_csv(const std::vector<ResultRow>& rows);

/// (1 - a) S + a (tr S / m) I with S the unbiased sample covariance of the
/// rows of `series` (T x m).
SpdMat cov_from_series(const Matrix& series, double shrinkage);

/// Summarizes an experiment CSV: rows grouped by every column except seed,
/// fold, value, wall_time and failed; emits count, failed, mean, std,
/// median, min, max per group. Summary rows of CV files are skipped.
std::string plot_prep(const std::string& csv_text, const std::string& origin = "<csv>");

/// Runs body(i) for i in [0, count) on up to `threads` workers. Exceptions are
/// rethrown after all workers finish (the lowest index wins).
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace spdwg::harness
