// Drives the command-line tool as a subprocess.

#include "support.hpp"

#include "spdwg/harness.hpp"
#include "spdwg/io.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

using namespace spdwg;
namespace fs = std::filesystem;

namespace {

struct WorkDir {
    fs::path path;
    WorkDir() : path(fs::temp_directory_path() / ("spdwg_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~WorkDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

const fs::path& workdir() {
    static const WorkDir dir;
    return dir.path;
}

fs::path file(const std::string& name) { return workdir() / name; }

/// Exit status of the tool run with `args`; stdout and stderr are discarded.
int run(const std::string& args) {
    const std::string cmd = std::string("\"") + SPDWG_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_params() {
    if (fs::exists(file("theta.json"))) return;
    io::save_params(harness::random_wg_params(2, CovKind::Full, 3), file("theta.json"));
}

}  // namespace

TEST_CASE("sample is reproducible per seed") {
    write_params();
    REQUIRE(run("sample --params " + q(file("theta.json")) + " --count 200 --seed 5 --out " + q(file("s1.jsonl"))) == 0);
    REQUIRE(run("--seed 5 sample --params " + q(file("theta.json")) + " --count 200 --out " + q(file("s2.jsonl"))) == 0);
    REQUIRE(run("sample --params " + q(file("theta.json")) + " --count 200 --seed 6 --out " + q(file("s3.jsonl"))) == 0);
    CHECK(io::read_file(file("s1.jsonl")) == io::read_file(file("s2.jsonl")));
    CHECK(io::read_file(file("s1.jsonl")) != io::read_file(file("s3.jsonl")));
    const LabeledSpdDataset d = io::load_dataset(file("s1.jsonl"));
    CHECK(d.size() == 200);
    CHECK(d.dim == 2);
    // The file holds the samples of the library call with the same seed.
    const std::vector<SpdMat> direct = sample(io::load_params(file("theta.json")), 200, 5);
    for (std::size_t i = 0; i < 200; ++i) CHECK(d.x[i].matrix() == direct[i].matrix());
}

TEST_CASE("density, estimate and classification round trip through files") {
    write_params();
    REQUIRE(run("sample --params " + q(file("theta.json")) + " --count 300 --seed 1 --out " + q(file("d.csv"))) == 0);
    REQUIRE(run("density --params " + q(file("theta.json")) + " --data " + q(file("d.csv")) + " --out " +
                q(file("dens.csv"))) == 0);
    const Matrix dens = io::load_numeric_csv(file("dens.csv"));
    const WgParams theta = io::load_params(file("theta.json"));
    const LabeledSpdDataset d = io::load_dataset(file("d.csv"));
    REQUIRE(dens.rows() == 300);
    for (Index i = 0; i < 300; i += 37)
        CHECK(dens(i, 1) == doctest::Approx(log_density(theta, d.x[static_cast<std::size_t>(i)])).epsilon(1e-12));

    REQUIRE(run("estimate --data " + q(file("d.csv")) + " --out-params " + q(file("fit.json")) + " --report " +
                q(file("report.json"))) == 0);
    const WgParams fit = io::load_params(file("fit.json"));
    CHECK(neg_log_lik(fit, d.x) <= neg_log_lik(theta, d.x));
    const auto report = nlohmann::json::parse(io::read_file(file("report.json")));
    CHECK(report.contains("iterations"));

    // Two classes: the sample above and a scaled copy.
    std::vector<SpdMat> x = d.x;
    std::vector<int> y(x.size(), 0);
    for (const auto& m : d.x) {
        x.push_back(m.scaled(50.0));
        y.push_back(1);
    }
    io::save_dataset(LabeledSpdDataset(x, y), file("two.jsonl"));
    REQUIRE(run("classify train --data " + q(file("two.jsonl")) + " --model tslda --out " + q(file("model.json"))) == 0);
    REQUIRE(run("classify predict --model-file " + q(file("model.json")) + " --data " + q(file("two.jsonl")) +
                " --out " + q(file("pred.csv"))) == 0);
    const Matrix pred = io::load_numeric_csv(file("pred.csv"));
    REQUIRE(pred.rows() == static_cast<Index>(x.size()));
    CHECK(pred.cols() == 5);
    CHECK((pred.col(1) - pred.col(2)).cwiseAbs().sum() <= 0.01 * static_cast<double>(pred.rows()));

    REQUIRE(run("cv --data " + q(file("two.jsonl")) + " --models mdm,tsqda:diag --k 3 --seed 2 --deterministic --out " +
                q(file("cv.csv"))) == 0);
    REQUIRE(run("plot-prep --in " + q(file("cv.csv")) + " --out " + q(file("cv_summary.csv"))) == 0);
    CHECK(io::read_file(file("cv_summary.csv")).find("accuracy") != std::string::npos);
}

TEST_CASE("mle-curve output is byte-identical under the determinism flag") {
    io::write_file(file("curve.ini"),
                   "deterministic = true\n"
                   "[mle_curve]\n"
                   "dims = 2\n"
                   "n_grid = 50, 200\n"
                   "seeds = 0, 1\n");
    REQUIRE(run("--config " + q(file("curve.ini")) + " mle-curve --out-dir " + q(file("c1"))) == 0);
    REQUIRE(run("--config " + q(file("curve.ini")) + " --threads 3 mle-curve --out-dir " + q(file("c2"))) == 0);
    const std::string a = io::read_file(file("c1") / "mle_curve.csv");
    CHECK(a == io::read_file(file("c2") / "mle_curve.csv"));
    CHECK(a.rfind("d,N,seed,cov,metric,value,wall_time,failed\n", 0) == 0);
    // Command-line values override the file.
    REQUIRE(run("--config " + q(file("curve.ini")) + " mle-curve --n-grid 60 --out-dir " + q(file("c3"))) == 0);
    CHECK(io::read_file(file("c3") / "mle_curve.csv").find(",60,") != std::string::npos);
}

TEST_CASE("cov-from-series") {
    io::write_file(file("series.csv"), "a,b\n1,2\n2,1\n3,5\n4,3\n");
    REQUIRE(run("cov-from-series --in " + q(file("series.csv")) + " --shrinkage 0.2 --out " + q(file("cov.json"))) == 0);
    const auto j = nlohmann::json::parse(io::read_file(file("cov.json")));
    const SpdMat c = io::spd_from_json(j.at("matrix"), "matrix");
    Matrix s(4, 2);
    s << 1, 2, 2, 1, 3, 5, 4, 3;
    CHECK(testing::rel_fro(c.matrix(), harness::cov_from_series(s, 0.2).matrix()) < 1e-15);
}

TEST_CASE("exit codes") {
    write_params();
    // Invalid input: missing required option, bad value, unknown subcommand.
    CHECK(run("sample --params " + q(file("theta.json")) + " --out " + q(file("x.jsonl"))) == 2);
    CHECK(run("sample --params " + q(file("theta.json")) + " --count -3 --out " + q(file("x.jsonl"))) == 2);
    CHECK(run("estimate --data " + q(file("d.csv")) + " --cov banana --out-params " + q(file("x.json"))) == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("cv --data " + q(file("two.jsonl")) + " --models svm --out " + q(file("x.csv"))) == 2);
    // Numerical failure: a constant series has a singular covariance.
    io::write_file(file("flat.csv"), "1,1\n1,1\n1,1\n");
    CHECK(run("cov-from-series --in " + q(file("flat.csv")) + " --out " + q(file("x.json"))) == 3);
    // I/O errors: missing or malformed files.
    CHECK(run("sample --params " + q(file("missing.json")) + " --count 3 --out " + q(file("x.jsonl"))) == 4);
    io::write_file(file("broken.jsonl"), "{\"d\": 2, \"classes\": 1}\n{\"label\": 0, \"matrix\": [[1, 2], [2, 1]]}\n");
    CHECK(run("estimate --data " + q(file("broken.jsonl")) + " --out-params " + q(file("x.json"))) == 4);
    CHECK(run("--help") == 0);
}
