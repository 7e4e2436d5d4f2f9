// spdwg: command-line front end for sampling, density evaluation, parameter
// estimation, classification and the benchmark harness.
//
// Every option can also be given in the --config file: key = option name
// with '-' replaced by '_', in the section named after the subcommand
// (mle_curve, classify_train, ...); global options go in [global] or before
// any section. Command-line values win.

#include "spdwg/harness.hpp"
#include "spdwg/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

using namespace spdwg;
namespace fs = std::filesystem;

struct Globals {
    std::uint64_t seed = 0;
    bool deterministic = false;
    int threads = 1;
    std::string config;
};

std::string config_key(std::string name) {
    for (char& c : name)
        if (c == '-') c = '_';
    return name;
}

// Fills options the user did not pass from the config section.
void apply_config(CLI::App* app, const harness::Config& cfg, const std::vector<std::string>& sections) {
    for (CLI::Option* opt : app->get_options()) {
        if (opt->count() > 0) continue;
        const std::string& lname = opt->get_lnames().empty() ? std::string() : opt->get_lnames().front();
        if (lname.empty() || lname == "help" || lname == "config") continue;
        for (const auto& sec : sections) {
            const auto v = cfg.get(sec, config_key(lname));
            if (!v) continue;
            if (opt->get_type_size() == 0) {
                if (!harness::parse_bool(*v, lname)) break;
                opt->add_result("true");
            } else {
                for (const auto& item : opt->get_expected_max() > 1 ? harness::split_list(*v) : std::vector{*v})
                    opt->add_result(item);
            }
            opt->run_callback();
            break;
        }
    }
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        io::write_file(path, text);
}

int run(int argc, char** argv) {
    CLI::App app{"Wrapped Gaussian distributions on SPD matrices"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_flag("--deterministic", g.deterministic, "Byte-reproducible output (wall times written as 0)");
    app.add_option("--threads", g.threads, "Worker threads for experiment cells and folds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--config", g.config, "Key-value configuration file");

    std::vector<std::pair<CLI::App*, std::string>> subs;
    const auto sub = [&](CLI::App* parent, const std::string& name, const std::string& desc, const std::string& section) {
        CLI::App* s = parent->add_subcommand(name, desc);
        s->fallthrough();
        subs.emplace_back(s, section);
        return s;
    };

    // sample
    std::string s_params, s_out;
    std::size_t s_count = 0;
    CLI::App* c_sample = sub(&app, "sample", "Draw samples from a parameter file", "sample");
    c_sample->add_option("--params", s_params, "Parameter JSON")->required();
    c_sample->add_option("--count", s_count, "Number of samples")->required()->check(CLI::PositiveNumber);
    c_sample->add_option("--out", s_out, "Output dataset (.jsonl or .csv)")->required();

    // density
    std::string de_params, de_data, de_out;
    CLI::App* c_density = sub(&app, "density", "Per-point log-density", "density");
    c_density->add_option("--params", de_params, "Parameter JSON")->required();
    c_density->add_option("--data", de_data, "Dataset")->required();
    c_density->add_option("--out", de_out, "Output CSV (default stdout)");

    // estimate
    std::string e_data, e_cov = "full", e_strategy = "profile", e_out, e_report;
    double e_tol = 1e-6;
    int e_max_iter = 5000;
    CLI::App* c_est = sub(&app, "estimate", "Maximum-likelihood fit", "estimate");
    c_est->add_option("--data", e_data, "Dataset")->required();
    c_est->add_option("--cov", e_cov, "Covariance kind")->check(CLI::IsMember({"full", "diag"}))->capture_default_str();
    c_est->add_option("--strategy", e_strategy, "Estimation strategy")
        ->check(CLI::IsMember({"profile", "joint"}))
        ->capture_default_str();
    c_est->add_option("--tol", e_tol, "Gradient-norm tolerance")->capture_default_str();
    c_est->add_option("--max-iter", e_max_iter, "Iteration cap")->capture_default_str();
    c_est->add_option("--out-params", e_out, "Output parameter JSON")->required();
    c_est->add_option("--report", e_report, "Output fit report JSON");

    // mle-curve
    std::string m_out_dir, m_dims, m_n_grid, m_seeds, m_cov, m_strategy, m_tol, m_max_iter, m_eps;
    CLI::App* c_mle = sub(&app, "mle-curve", "Estimation error versus sample size", "mle_curve");
    c_mle->add_option("--out-dir", m_out_dir, "Output directory")->required();
    c_mle->add_option("--dims", m_dims, "Comma-separated dimensions");
    c_mle->add_option("--n-grid", m_n_grid, "Comma-separated sample sizes");
    c_mle->add_option("--seeds", m_seeds, "Comma-separated seeds");
    c_mle->add_option("--cov", m_cov, "Comma-separated covariance kinds (full, diag)");
    c_mle->add_option("--strategy", m_strategy, "profile or joint");
    c_mle->add_option("--tol", m_tol, "Gradient-norm tolerance");
    c_mle->add_option("--max-iter", m_max_iter, "Iteration cap");
    c_mle->add_option("--eps-pd", m_eps, "Relative eigenvalue floor for SPD checks");

    // classify
    CLI::App* c_cls = app.add_subcommand("classify", "Train or apply a classifier");
    c_cls->require_subcommand(1);
    c_cls->fallthrough();
    std::string t_data, t_model, t_out, t_strategy = "profile";
    bool t_diag = false, t_uniform = false;
    double t_tol = 1e-6;
    CLI::App* c_train = sub(c_cls, "train", "Fit a classifier", "classify_train");
    c_train->add_option("--data", t_data, "Labeled dataset")->required();
    c_train->add_option("--model", t_model, "mdm, tslda, tsqda, howda or hewda")->required();
    c_train->add_flag("--diag", t_diag, "Diagonal covariances");
    c_train->add_flag("--uniform-priors", t_uniform, "Equal class priors");
    c_train->add_option("--strategy", t_strategy, "Estimation strategy for wrapped models")
        ->check(CLI::IsMember({"profile", "joint"}));
    c_train->add_option("--tol", t_tol, "Optimizer tolerance");
    c_train->add_option("--out", t_out, "Output model JSON")->required();
    std::string p_model, p_data, p_out;
    CLI::App* c_pred = sub(c_cls, "predict", "Apply a trained classifier", "classify_predict");
    c_pred->add_option("--model-file", p_model, "Model JSON")->required();
    c_pred->add_option("--data", p_data, "Dataset")->required();
    c_pred->add_option("--out", p_out, "Output CSV (default stdout)");

    // cv
    std::string v_data, v_models, v_out;
    int v_k = 5;
    bool v_uniform = false;
    CLI::App* c_cv = sub(&app, "cv", "Stratified k-fold cross-validation", "cv");
    c_cv->add_option("--data", v_data, "Labeled dataset")->required();
    c_cv->add_option("--models", v_models, "Comma-separated classifiers, e.g. mdm,tsqda:diag,hewda")->required();
    c_cv->add_option("--k", v_k, "Number of folds")->capture_default_str();
    c_cv->add_flag("--uniform-priors", v_uniform, "Equal class priors");
    c_cv->add_option("--out", v_out, "Output CSV (default stdout)");

    // cov-from-series
    std::string f_in, f_out;
    double f_alpha = 0.0;
    CLI::App* c_cfs = sub(&app, "cov-from-series", "Shrunk covariance of a multichannel series", "cov_from_series");
    c_cfs->add_option("--in", f_in, "Numeric CSV, one row per time step")->required();
    c_cfs->add_option("--shrinkage", f_alpha, "Shrinkage in [0, 1]")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    c_cfs->add_option("--out", f_out, "Output JSON")->required();

    // plot-prep
    std::string q_in, q_out;
    CLI::App* c_plot = sub(&app, "plot-prep", "Summarize an experiment CSV per group", "plot_prep");
    c_plot->add_option("--in", q_in, "Experiment CSV")->required();
    c_plot->add_option("--out", q_out, "Output CSV (default stdout)");

    // Required options may come from the config file, so requirements are
    // checked after the config has been merged.
    std::vector<std::pair<CLI::App*, CLI::Option*>> required;
    for (auto& [s, sec] : subs)
        for (CLI::Option* o : s->get_options())
            if (o->get_required()) {
                required.emplace_back(s, o);
                o->required(false);
            }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    harness::Config cfg;
    if (!g.config.empty()) cfg = harness::Config::load(g.config);
    apply_config(&app, cfg, {"global", ""});
    for (auto& [s, sec] : subs)
        if (s->parsed()) apply_config(s, cfg, {sec});
    for (auto [s, o] : required)
        if (o->count() == 0 && s->parsed()) {
            std::cerr << "error: " << s->get_name() << ": " << o->get_name() << " is required\n";
            return 2;
        }

    if (c_sample->parsed()) {
        const WgParams theta = io::load_params(s_params);
        const std::vector<SpdMat> xs = sample(theta, s_count, g.seed);
        io::save_dataset(LabeledSpdDataset(xs, std::vector<int>(xs.size(), 0)), s_out);
    } else if (c_density->parsed()) {
        const WgParams theta = io::load_params(de_params);
        const LabeledSpdDataset data = io::load_dataset(de_data);
        std::string out = "index,log_density\n";
        for (std::size_t i = 0; i < data.size(); ++i)
            out += std::to_string(i) + "," + io::format_double(log_density(theta, data.x[i])) + "\n";
        write_output(de_out, out);
    } else if (c_est->parsed()) {
        const LabeledSpdDataset data = io::load_dataset(e_data);
        MleOptions opts;
        opts.cov_kind = cov_kind_from_string(e_cov);
        opts.strategy = mle_strategy_from_string(e_strategy);
        opts.tol = e_tol;
        opts.max_iter = e_max_iter;
        opts.deterministic = g.deterministic;
        opts.seed = g.seed;
        MleResult res = fit_mle(data.x, opts);
        if (g.deterministic) res.report.wall_time = 0.0;
        io::save_params(res.theta, e_out);
        if (!e_report.empty()) io::write_file(e_report, io::report_to_json(res.report).dump(2) + "\n");
        for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << "\n";
    } else if (c_mle->parsed()) {
        const std::pair<const char*, std::string*> overrides[] = {
            {"dims", &m_dims}, {"n_grid", &m_n_grid}, {"seeds", &m_seeds},       {"cov", &m_cov},
            {"strategy", &m_strategy}, {"tol", &m_tol}, {"max_iter", &m_max_iter}, {"eps_pd", &m_eps}};
        for (const auto& [key, val] : overrides)
            if (!val->empty()) cfg.set("mle_curve", key, *val);
        harness::MleCurveConfig mc = harness::mle_curve_config(cfg);
        mc.threads = g.threads;
        mc.deterministic = g.deterministic;
        const auto rows = harness::run_mle_curve(mc);
        std::error_code ec;
        fs::create_directories(m_out_dir, ec);
        if (ec) throw IoError("cannot create '" + m_out_dir + "': " + ec.message());
        io::write_file(fs::path(m_out_dir) / "mle_curve.csv", harness::mle_curve_csv(rows));
        nlohmann::json meta;
        meta["comparison"] = "minimal representatives of true and estimated parameters";
        meta["generator"] = "p = random_spd(d, 0.1, 1); mu ~ U[0, 0.1]; Sigma = random_spd(n, 0.01, 0.02) or U(0, 1] diagonal";
        meta["strategy"] = to_string(mc.strategy);
        meta["tol"] = mc.tol;
        meta["max_iter"] = mc.max_iter;
        meta["eps_pd"] = mc.eps_pd ? *mc.eps_pd : spd_relative_eps();
        std::size_t failed = 0;
        for (const auto& r : rows) failed += r.failed;
        meta["failed_rows"] = failed;
        io::write_file(fs::path(m_out_dir) / "mle_curve_meta.json", meta.dump(2) + "\n");
    } else if (c_train->parsed()) {
        const LabeledSpdDataset data = io::load_dataset(t_data);
        ClassifierSpec spec = ClassifierSpec::parse(t_model);
        spec.diag = spec.diag || t_diag;
        ClassifierOptions opts;
        opts.uniform_priors = t_uniform;
        opts.mle.strategy = mle_strategy_from_string(t_strategy);
        opts.mle.tol = t_tol;
        opts.mle.seed = g.seed;
        const ClassifierModel model = fit_classifier(data, spec, opts);
        io::save_model(model, t_out);
        for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
    } else if (c_pred->parsed()) {
        const ClassifierModel model = io::load_model(p_model);
        const LabeledSpdDataset data = io::load_dataset(p_data);
        if (data.dim != model.dim())
            throw DimMismatch("data dimension " + std::to_string(data.dim) + " differs from the model's " +
                              std::to_string(model.dim()));
        std::string out = "index,label,predicted";
        for (int k = 0; k < model.n_classes(); ++k) out += ",log_proba_" + std::to_string(k);
        out += "\n";
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Vector lp = predict_log_proba(model, data.x[i]);
            out += std::to_string(i) + "," + std::to_string(data.labels[i]) + "," +
                   std::to_string(predict(model, data.x[i]));
            for (Index k = 0; k < lp.size(); ++k) out += "," + io::format_double(lp(k));
            out += "\n";
        }
        write_output(p_out, out);
    } else if (c_cv->parsed()) {
        const LabeledSpdDataset data = io::load_dataset(v_data);
        harness::CvConfig cv;
        for (const auto& m : harness::split_list(v_models)) cv.specs.push_back(ClassifierSpec::parse(m));
        cv.k = v_k;
        cv.seed = g.seed;
        cv.threads = g.threads;
        cv.deterministic = g.deterministic;
        cv.options.uniform_priors = v_uniform;
        cv.options.mle.seed = g.seed;
        write_output(v_out, harness::cv_csv(harness::run_cv(data, cv)));
    } else if (c_cfs->parsed()) {
        const SpdMat c = harness::cov_from_series(io::load_numeric_csv(f_in), f_alpha);
        nlohmann::json j;
        j["d"] = c.dim();
        j["matrix"] = io::matrix_to_json(c.matrix());
        io::write_file(f_out, j.dump(2) + "\n");
    } else if (c_plot->parsed()) {
        write_output(q_out, harness::plot_prep(io::read_file(q_in), q_in));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const spdwg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
