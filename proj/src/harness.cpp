#include "spdwg/harness.hpp"

#include "spdwg/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace spdwg::harness {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Restores the process-wide SPD threshold on scope exit.
class EpsGuard {
public:
    explicit EpsGuard(std::optional<double> eps) : saved_(spd_relative_eps()) {
        if (eps) set_spd_relative_eps(*eps);
    }
    ~EpsGuard() { set_spd_relative_eps(saved_); }
    EpsGuard(const EpsGuard&) = delete;
    EpsGuard& operator=(const EpsGuard&) = delete;

private:
    double saved_;
};

SpdMat cov_as_spd(const CovSpec& c) { return c.is_full() ? c.full_matrix() : SpdMat::diagonal(c.diag()); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

SpdMat random_spd(Index d, double c, double s, std::uint64_t seed) {
    Rng rng(seed);
    return random_spd(d, c, s, rng);
}

SpdMat random_spd(Index d, double c, double s, Rng& rng) {
    if (d < 1) throw InvalidInput("random_spd: dimension must be positive");
    const Matrix x = c * Matrix::Identity(d, d) + s * rng.normal_matrix(d, d);
    return SpdMat::exp_of(SymMat::symmetrize(x.transpose() * x));
}

WgParams random_wg_params(Index d, CovKind kind, std::uint64_t seed) {
    Rng rng(seed);
    return random_wg_params(d, kind, rng);
}

WgParams random_wg_params(Index d, CovKind kind, Rng& rng) {
    if (d < 1) throw InvalidInput("random_wg_params: dimension must be positive");
    const Index n = tangent_dim(d);
    SpdMat p = random_spd(d, 0.1, 1.0, rng);
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = rng.uniform(0.0, 0.1);
    CovSpec sigma;
    if (kind == CovKind::Full) {
        sigma = CovSpec::full(random_spd(n, 0.01, 0.02, rng));
    } else {
        Vector dg(n);
        for (Index i = 0; i < n; ++i) dg(i) = rng.uniform_pos();
        sigma = CovSpec::diagonal(std::move(dg));
    }
    return minimal_representative(WgParams(std::move(p), std::move(mu), std::move(sigma)));
}

// ---------------------------------------------------------------- config

Config Config::parse(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InvalidInput(origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            cfg.data_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw InvalidInput(origin + ":" + std::to_string(lineno) + ": empty key");
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        cfg.data_[section][key] = std::move(value);
    }
    return cfg;
}

Config Config::load(const std::string& path) { return parse(io::read_file(path), path); }

bool Config::has(const std::string& section, const std::string& key) const { return get(section, key).has_value(); }

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
    const auto s = data_.find(section);
    if (s == data_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
    data_[section][key] = std::move(value);
}

const std::map<std::string, std::string>& Config::section(const std::string& name) const {
    static const std::map<std::string, std::string> empty;
    const auto s = data_.find(name);
    return s == data_.end() ? empty : s->second;
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : data_) out.push_back(k);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(what + ": '" + s + "' is not an integer");
}

double parse_real(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(what + ": '" + s + "' is not a finite number");
}

bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw InvalidInput(what + ": '" + s + "' is not a boolean");
}

MleCurveConfig mle_curve_config(const Config& cfg) {
    MleCurveConfig out;
    const std::string sec = "mle_curve";
    if (auto v = cfg.get(sec, "dims")) {
        out.dims.clear();
        for (const auto& t : split_list(*v)) out.dims.push_back(static_cast<Index>(parse_int(t, "dims")));
    }
    if (auto v = cfg.get(sec, "n_grid")) {
        out.n_grid.clear();
        for (const auto& t : split_list(*v)) out.n_grid.push_back(parse_int(t, "n_grid"));
    }
    if (auto v = cfg.get(sec, "seeds")) {
        out.seeds.clear();
        for (const auto& t : split_list(*v)) {
            const long long s = parse_int(t, "seeds");
            if (s < 0) throw InvalidInput("seeds must be non-negative");
            out.seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    if (auto v = cfg.get(sec, "cov")) {
        out.cov_kinds.clear();
        for (const auto& t : split_list(*v)) out.cov_kinds.push_back(cov_kind_from_string(t));
    }
    if (auto v = cfg.get(sec, "strategy")) out.strategy = mle_strategy_from_string(*v);
    if (auto v = cfg.get(sec, "tol")) out.tol = parse_real(*v, "tol");
    if (auto v = cfg.get(sec, "max_iter")) out.max_iter = static_cast<int>(parse_int(*v, "max_iter"));
    if (auto v = cfg.get(sec, "eps_pd")) out.eps_pd = parse_real(*v, "eps_pd");
    for (const std::string& s : {std::string(), std::string("global"), sec}) {
        if (auto v = cfg.get(s, "threads")) out.threads = static_cast<int>(parse_int(*v, "threads"));
        if (auto v = cfg.get(s, "deterministic")) out.deterministic = parse_bool(*v, "deterministic");
    }
    if (out.dims.empty() || out.n_grid.empty() || out.seeds.empty() || out.cov_kinds.empty())
        throw InvalidInput("mle_curve: dims, n_grid, seeds and cov must be nonempty");
    for (Index d : out.dims)
        if (d < 1) throw InvalidInput("mle_curve: dimensions must be positive");
    for (long long n : out.n_grid)
        if (n < 2) throw InvalidInput("mle_curve: sample sizes must be at least 2");
    if (!(out.tol > 0.0)) throw InvalidInput("mle_curve: tol must be positive");
    return out;
}

// ---------------------------------------------------------------- mle curve

std::vector<ResultRow> run_mle_curve(const MleCurveConfig& cfg) {
    struct Cell {
        Index d;
        CovKind kind;
        long long n;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (Index d : cfg.dims)
        for (CovKind kind : cfg.cov_kinds)
            for (long long n : cfg.n_grid)
                for (std::uint64_t seed : cfg.seeds) cells.push_back({d, kind, n, seed});

    static const char* const kMetrics[] = {"dist_p", "err_mu", "dist_sigma"};
    std::vector<std::vector<ResultRow>> out(cells.size());
    const EpsGuard guard(cfg.eps_pd);

    parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        const auto t0 = std::chrono::steady_clock::now();
        double vals[3];
        bool failed = false;
        try {
            // The generator depends on (seed, d) only: every N and both
            // covariance kinds see the same p* and mu*.
            const WgParams truth = random_wg_params(c.d, c.kind, Rng::split(c.seed, static_cast<std::uint64_t>(c.d)));
            const std::vector<SpdMat> data =
                sample(truth, static_cast<std::size_t>(c.n), Rng::split(c.seed, 1000 + static_cast<std::uint64_t>(c.d)));
            MleOptions opts;
            opts.cov_kind = c.kind;
            opts.tol = cfg.tol;
            opts.max_iter = cfg.max_iter;
            opts.strategy = cfg.strategy;
            opts.deterministic = cfg.deterministic;
            opts.seed = c.seed;
            const WgParams est = fit_mle(data, opts).theta;
            const WgParams t = minimal_representative(truth);
            vals[0] = dist(est.p, t.p);
            vals[1] = (est.mu - t.mu).norm();
            vals[2] = dist(cov_as_spd(est.sigma), cov_as_spd(t.sigma));
            failed = !(std::isfinite(vals[0]) && std::isfinite(vals[1]) && std::isfinite(vals[2]));
        } catch (const Error&) {
            failed = true;
        }
        const double wall = cfg.deterministic ? 0.0 : seconds_since(t0);
        for (int m = 0; m < 3; ++m) {
            ResultRow r;
            r.experiment = "mle_curve";
            r.model = to_string(c.kind);
            r.seed = c.seed;
            r.d = c.d;
            r.n = c.n;
            r.metric = kMetrics[m];
            r.value = failed ? std::numeric_limits<double>::quiet_NaN() : vals[m];
            r.wall_time = wall;
            r.failed = failed;
            out[i].push_back(std::move(r));
        }
    });

    std::vector<ResultRow> rows;
    for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.d, a.model, a.n, a.seed, a.metric) < std::tie(b.d, b.model, b.n, b.seed, b.metric);
    });
    return rows;
}

std::string mle_curve_csv(const std::vector<ResultRow>& rows) {
    std::string s = "d,N,seed,cov,metric,value,wall_time,failed\n";
    for (const auto& r : rows)
        s += std::to_string(r.d) + "," + std::to_string(r.n) + "," + std::to_string(r.seed) + "," + csv_field(r.model) +
             "," + r.metric + "," + (r.failed ? std::string("nan") : io::format_double(r.value)) + "," +
             io::format_double(r.wall_time) + "," + (r.failed ? "1" : "0") + "\n";
    return s;
}

// ---------------------------------------------------------------- cv

std::vector<int> stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
    const auto n = labels.size();
    if (k < 2) throw InvalidInput("cross-validation needs k >= 2");
    if (static_cast<std::size_t>(k) > n)
        throw InvalidInput("k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
    Rng rng(seed);
    std::vector<int> fold(n, 0);
    if (static_cast<std::size_t>(k) == n) {
        // Leave-one-out: a random permutation of fold ids.
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
        return ids;
    }
    const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::size_t offset = 0;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == c) idx.push_back(i);
        if (idx.empty()) continue;
        if (idx.size() < static_cast<std::size_t>(k))
            throw InvalidInput("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                               " members, fewer than k = " + std::to_string(k));
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = static_cast<int>((offset + j) % k);
        offset += idx.size();
    }
    return fold;
}

std::vector<ResultRow> run_cv(const LabeledSpdDataset& data, const CvConfig& cfg) {
    if (cfg.specs.empty()) throw InvalidInput("cross-validation needs at least one classifier");
    const std::vector<int> fold = stratified_folds(data.labels, cfg.k, cfg.seed);

    struct Task {
        std::size_t spec;
        int fold;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < cfg.specs.size(); ++s)
        for (int f = 0; f < cfg.k; ++f) tasks.push_back({s, f});

    std::vector<ResultRow> per(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        const Task& t = tasks[i];
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> train, test;
        for (std::size_t j = 0; j < data.size(); ++j) (fold[j] == t.fold ? test : train).push_back(j);
        ResultRow r;
        r.experiment = "cv";
        r.model = cfg.specs[t.spec].name();
        r.seed = cfg.seed;
        r.d = data.dim;
        r.n = static_cast<long long>(test.size());
        r.fold = t.fold;
        r.metric = "accuracy";
        try {
            LabeledSpdDataset tr = data.subset(train);
            tr.n_classes = data.n_classes;
            const ClassifierModel model = fit_classifier(tr, cfg.specs[t.spec], cfg.options);
            std::size_t correct = 0;
            for (std::size_t j : test) correct += predict(model, data.x[j]) == data.labels[j];
            r.value = static_cast<double>(correct) / static_cast<double>(test.size());
        } catch (const Error&) {
            r.value = std::numeric_limits<double>::quiet_NaN();
            r.failed = true;
        }
        r.wall_time = cfg.deterministic ? 0.0 : seconds_since(t0);
        per[i] = std::move(r);
    });

    std::vector<ResultRow> rows = per;
    for (std::size_t s = 0; s < cfg.specs.size(); ++s) {
        std::vector<double> acc;
        double wall = 0.0;
        bool any_failed = false;
        for (const auto& r : per)
            if (r.model == cfg.specs[s].name()) {
                wall += r.wall_time;
                if (r.failed)
                    any_failed = true;
                else
                    acc.push_back(r.value);
            }
        for (const char* metric : {"accuracy_mean", "accuracy_std"}) {
            ResultRow r;
            r.experiment = "cv";
            r.model = cfg.specs[s].name();
            r.seed = cfg.seed;
            r.d = data.dim;
            r.n = static_cast<long long>(data.size());
            r.metric = metric;
            r.wall_time = wall;
            r.failed = any_failed || acc.empty();
            if (r.failed)
                r.value = std::numeric_limits<double>::quiet_NaN();
            else if (std::string(metric) == "accuracy_mean")
                r.value = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
            else
                r.value = sample_std(acc);
            rows.push_back(std::move(r));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.model, a.fold, a.metric) < std::tie(b.model, b.fold, b.metric);
    });
    return rows;
}

std::string cv_csv(const std::vector<ResultRow>& rows) {
    std::string s = "model,d,N,seed,fold,metric,value,wall_time,failed\n";
    for (const auto& r : rows)
        s += csv_field(r.model) + "," + std::to_string(r.d) + "," + std::to_string(r.n) + "," + std::to_string(r.seed) +
             "," + (r.fold < 0 ? std::string("all") : std::to_string(r.fold)) + "," + r.metric + "," +
             (r.failed ? std::string("nan") : io::format_double(r.value)) + "," + io::format_double(r.wall_time) + "," +
             (r.failed ? "1" : "0") + "\n";
    return s;
}

// ---------------------------------------------------------------- misc

SpdMat cov_from_series(const Matrix& series, double shrinkage) {
    if (series.rows() < 2) throw InvalidInput("cov_from_series needs at least 2 time steps");
    if (series.cols() < 1) throw InvalidInput("cov_from_series needs at least one channel");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw InvalidInput("shrinkage must lie in [0, 1]");
    if (!series.allFinite()) throw InvalidInput("series has non-finite entries");
    const Index m = series.cols();
    const Matrix c = series.rowwise() - series.colwise().mean();
    const Matrix s = c.transpose() * c / static_cast<double>(series.rows() - 1);
    const Matrix shrunk = (1.0 - shrinkage) * s + shrinkage * (s.trace() / static_cast<double>(m)) * Matrix::Identity(m, m);
    try {
        return SpdMat(SymMat::symmetrize(shrunk));
    } catch (const DomainError&) {
        throw SingularCovariance("series covariance is singular; increase the shrinkage", c.colwise().mean().transpose(),
                                 shrunk);
    }
}

std::string plot_prep(const std::string& csv_text, const std::string& origin) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(origin + ": empty CSV");
    const std::vector<std::string> header = csv_split(line);
    const auto col = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int value_col = col("value");
    if (value_col < 0) throw IoError(origin + ": no 'value' column");
    const int failed_col = col("failed");
    const int fold_col = col("fold");
    std::vector<int> key_cols;
    for (int i = 0; i < static_cast<int>(header.size()); ++i)
        if (header[i] != "seed" && header[i] != "fold" && header[i] != "value" && header[i] != "wall_time" &&
            header[i] != "failed")
            key_cols.push_back(i);

    struct Group {
        std::vector<double> values;
        std::size_t failed = 0;
    };
    std::map<std::vector<std::string>, Group> groups;
    std::vector<std::vector<std::string>> order;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != header.size())
            throw IoError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
        if (fold_col >= 0 && f[fold_col] == "all") continue;
        std::vector<std::string> key;
        for (int c : key_cols) key.push_back(f[c]);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        const bool failed = failed_col >= 0 && f[failed_col] == "1";
        if (failed) {
            ++it->second.failed;
            continue;
        }
        double v;
        try {
            v = parse_real(f[value_col], "value");
        } catch (const Error&) {
            throw IoError(origin + ":" + std::to_string(lineno) + ": non-finite value in a row not flagged failed");
        }
        it->second.values.push_back(v);
    }

    std::string out;
    for (int c : key_cols) out += csv_field(header[c]) + ",";
    out += "count,failed,mean,std,median,min,max\n";
    for (const auto& key : order) {
        const Group& g = groups.at(key);
        for (const auto& k : key) out += csv_field(k) + ",";
        out += std::to_string(g.values.size()) + "," + std::to_string(g.failed) + ",";
        if (g.values.empty()) {
            out += ",,,,\n";
            continue;
        }
        const double mean = std::accumulate(g.values.begin(), g.values.end(), 0.0) / static_cast<double>(g.values.size());
        const auto [mn, mx] = std::minmax_element(g.values.begin(), g.values.end());
        out += io::format_double(mean) + "," + io::format_double(sample_std(g.values)) + "," +
               io::format_double(median_of(g.values)) + "," + io::format_double(*mn) + "," + io::format_double(*mx) + "\n";
    }
    return out;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    std::vector<std::exception_ptr> errors(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace spdwg::harness
