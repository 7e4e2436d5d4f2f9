#include "support.hpp"

#include "spdwg/wgauss.hpp"

#include <numbers>

using namespace spdwg;
using namespace testing;

namespace {

const double e = std::exp(1.0);
const double log2pi = std::log(2.0 * std::numbers::pi);

WgParams random_theta(Rng& rng, Index d, CovKind kind = CovKind::Full, double scale = 0.3) {
    const Index n = tangent_dim(d);
    const SpdMat p = testing::random_spd(rng, d);
    const Vector mu = rng.normal_vector(n) * scale;
    if (kind == CovKind::Full) {
        const Matrix a = rng.normal_matrix(n, n) * scale;
        return {p, mu, CovSpec::full(SpdMat(SymMat::symmetrize(a * a.transpose() + 0.05 * Matrix::Identity(n, n))))};
    }
    Vector dg(n);
    for (Index i = 0; i < n; ++i) dg(i) = scale * scale * (0.2 + rng.uniform());
    return {p, mu, CovSpec::diagonal(dg)};
}

// Determinant of the central-difference differential of Exp_p at u, with
// input coordinates in the orthonormal basis at p and output coordinates in
// the orthonormal basis at Exp_p(u). Uses Pade matrix functions only.
double fd_jacobian(const Matrix& p, const Matrix& u, double h = 1e-5) {
    const Index d = p.rows();
    const Index n = d * (d + 1) / 2;
    const Matrix ps = ref_sqrt(p);
    const Matrix q = ref_exp_map(p, u);
    const Matrix qis = ref_sqrt(q).inverse();
    Matrix jac(n, n);
    for (Index k = 0; k < n; ++k) {
        Vector t = Vector::Zero(n);
        t(k) = 1.0;
        const Matrix ek = ps * unvectorize_at_identity(t).matrix() * ps;  // basis vector at p
        const Matrix dq = ref_exp_map(p, u + h * ek) - ref_exp_map(p, u - h * ek);
        jac.col(k) = ref_vect_identity(qis * dq * qis / (2.0 * h));
    }
    return std::abs(jac.determinant());
}

}  // namespace

TEST_CASE("CovSpec and WgParams validation") {
    CHECK_THROWS_AS(CovSpec::diagonal((Vector(3) << 1, 0, 1).finished()), InvalidInput);
    CHECK_THROWS_AS(CovSpec::diagonal((Vector(3) << 1, std::nan(""), 1).finished()), InvalidInput);
    const SpdMat p = SpdMat::identity(2);
    CHECK_THROWS_AS(WgParams(p, Vector::Zero(4), CovSpec::identity(3)), DimMismatch);
    CHECK_THROWS_AS(WgParams(p, Vector::Zero(3), CovSpec::identity(4)), DimMismatch);
    CHECK_NOTHROW(WgParams(p, Vector::Zero(3), CovSpec::identity(3, CovKind::Diagonal)));
    CHECK(cov_kind_from_string("diag") == CovKind::Diagonal);
    CHECK(cov_kind_from_string("full") == CovKind::Full);
    CHECK_THROWS_AS(cov_kind_from_string("banded"), InvalidInput);

    Rng rng(1);
    const WgParams th = random_theta(rng, 2);
    const Vector r = rng.normal_vector(3);
    CHECK(th.sigma.mahalanobis_sq(r) ==
          doctest::Approx(r.dot(th.sigma.dense().llt().solve(r))).epsilon(1e-12));
    CHECK(th.sigma.logdet() == doctest::Approx(std::log(th.sigma.dense().determinant())).epsilon(1e-12));
    const Matrix l = th.sigma.cholesky();
    CHECK(rel_fro(l * l.transpose(), th.sigma.dense()) < 1e-13);
}

TEST_CASE("wrap and unwrap") {
    Rng rng(2);
    const SpdMat p = testing::random_spd(rng, 3);
    CHECK(rel_fro(wrap_point(p, Vector::Zero(6)).matrix(), p.matrix()) < 1e-14);
    const SpdMat i2 = SpdMat::identity(2);
    CHECK(rel_fro(wrap_point(i2, (Vector(3) << 1, 0, 1).finished()).matrix(), e * Matrix::Identity(2, 2)) < 1e-14);
    Vector dg(2);
    dg << e * e, 1;
    const Vector t = unwrap_point(i2, SpdMat::diagonal(dg));
    CHECK((t - (Vector(3) << 2, 0, 0).finished()).norm() < 1e-14);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector v = rng.normal_vector(6);
        CHECK((unwrap_point(p, wrap_point(p, v)) - v).norm() < 1e-9 * std::max(1.0, v.norm()));
    }
    CHECK_THROWS_AS(wrap_point(p, Vector::Zero(3)), DimMismatch);
}

TEST_CASE("sampling") {
    Rng rng(3);
    const WgParams th = random_theta(rng, 2);
    CHECK(sample(th, 0, 1).empty());

    const WgParams tight(SpdMat::identity(2), Vector::Zero(3), CovSpec::full(Matrix(1e-8 * Matrix::Identity(3, 3))));
    for (const auto& x : sample(tight, 200, 9)) CHECK(dist(x, SpdMat::identity(2)) < 1e-3);

    const WgParams unit(SpdMat::identity(2), Vector::Zero(3), CovSpec::identity(3));
    const auto xs = sample(unit, 10000, 4);
    Vector m = Vector::Zero(3);
    for (const auto& x : xs) m += unwrap_point(SpdMat::identity(2), x);
    m /= 10000.0;
    CHECK(m.norm() <= 4.0 * std::sqrt(3.0 / 1e4));

    const auto a = sample(th, 50, 77), b = sample(th, 50, 77);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].matrix() == b[i].matrix());
    const auto c = sample(th, 50, 78);
    CHECK(c[0].matrix() != a[0].matrix());
}

TEST_CASE("samples have the requested tangent moments") {
    Rng rng(4);
    for (CovKind kind : {CovKind::Full, CovKind::Diagonal}) {
        const WgParams th = random_theta(rng, 2, kind, 0.5);
        const std::size_t N = 40000;
        const auto xs = sample(th, N, 10);
        Matrix t(3, static_cast<Index>(N));
        for (std::size_t i = 0; i < N; ++i) t.col(static_cast<Index>(i)) = unwrap_point(th.p, xs[i]);
        const Vector mean = t.rowwise().mean();
        const Matrix c = (t.colwise() - mean) * (t.colwise() - mean).transpose() / static_cast<double>(N);
        for (Index i = 0; i < 3; ++i)
            CHECK(std::abs(mean(i) - th.mu(i)) < 4.0 * std::sqrt(th.sigma.dense()(i, i) / static_cast<double>(N)));
        CHECK(rel_fro(c, th.sigma.dense()) < 0.05);
    }
}

TEST_CASE("samples satisfy the SPD invariant") {
    for (Index d : {2, 5}) {
        Rng rng(static_cast<std::uint64_t>(d));
        const WgParams th = random_theta(rng, d, CovKind::Full, 0.4);
        for (const auto& x : sample(th, 10000, 5)) {
            const Vector ev = eigh(x.sym()).values;
            CHECK_MESSAGE(ev(ev.size() - 1) > spd_relative_eps() * ev(0), "min eigenvalue");
        }
    }
}

TEST_CASE("jacobian determinant examples") {
    Rng rng(5);
    const SpdMat p = testing::random_spd(rng, 3);
    CHECK(jacobian_det(p, TangentVec::zero(p)) == doctest::Approx(1.0).epsilon(1e-14));
    const SpdMat i2 = SpdMat::identity(2);
    Vector dg(2);
    dg << 1, -1;
    CHECK(jacobian_det(i2, {i2, SymMat::diagonal(dg)}) == doctest::Approx(std::sinh(1.0)).epsilon(1e-14));
    CHECK(jacobian_det(i2, {i2, SymMat::diagonal(dg)}) == doctest::Approx(1.1752012).epsilon(1e-7));
    // Repeated eigenvalues and tiny gaps use the limit value.
    CHECK(jacobian_det(i2, {i2, SymMat::identity(2) * 3.0}) == doctest::Approx(1.0).epsilon(1e-15));
    dg << 1e-9, 0;
    CHECK(jacobian_det(i2, {i2, SymMat::diagonal(dg)}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("jacobian determinant matches finite differences") {
    Rng rng(6);
    for (Index d : {2, 3}) {
        for (int rep = 0; rep < 10; ++rep) {
            const SpdMat p = testing::random_spd(rng, d, 0.5);
            const TangentVec u(p, random_sym(rng, d, 0.7).congruence(p.sqrt().matrix()));
            const double ref = fd_jacobian(p.matrix(), u.vec().matrix());
            CHECK(rel_err(jacobian_det(p, u), ref) < 1e-4);
        }
    }
}

TEST_CASE("jacobian determinant depends only on the whitened spectrum") {
    Rng rng(7);
    const SpdMat id = SpdMat::identity(4);
    for (int rep = 0; rep < 10; ++rep) {
        const SymMat u = random_sym(rng, 4);
        const Matrix q = random_orthogonal(rng, 4);
        CHECK(jacobian_det(id, {id, u}) == doctest::Approx(jacobian_det(id, {id, u.congruence(q)})).epsilon(1e-10));
        const SpdMat p = testing::random_spd(rng, 4);
        const TangentVec up(p, u.congruence(p.sqrt().matrix()));
        CHECK(jacobian_det(p, up) == doctest::Approx(jacobian_det(id, {id, u})).epsilon(1e-10));
        // Closed form from the spectrum, written independently.
        const Vector l = eigh(u).values;
        double ref = 1.0;
        for (Index i = 0; i < 4; ++i)
            for (Index j = i + 1; j < 4; ++j) {
                const double g = l(i) - l(j);
                ref *= 2.0 * std::sinh(g / 2.0) / g;
            }
        CHECK(jacobian_det(id, {id, u}) == doctest::Approx(ref).epsilon(1e-12));
    }
    // Large gaps stay finite in log form.
    Vector big(2);
    big << 400, -400;
    const SpdMat i2 = SpdMat::identity(2);
    const double lj = log_jacobian_det(i2, {i2, SymMat::diagonal(big)});
    CHECK(lj == doctest::Approx(400.0 - std::log(800.0)).epsilon(1e-12));
}

TEST_CASE("log density examples") {
    Rng rng(8);
    const SpdMat p = testing::random_spd(rng, 2);
    const WgParams th(p, Vector::Zero(3), CovSpec::identity(3));
    CHECK(log_density(th, p) == doctest::Approx(-1.5 * log2pi).epsilon(1e-13));
    CHECK(log_density(th, p) == doctest::Approx(-2.7568156).epsilon(1e-7));
    for (int rep = 0; rep < 20; ++rep) {
        const WgParams t2 = random_theta(rng, 2);
        const SpdMat x = testing::random_spd(rng, 2);
        CHECK(density(t2, x) > 0.0);
        for (double t : {-1.0, 0.5, 2.0})
            CHECK(std::abs(log_density(t2, x) - log_density(translate_class(t2, t), x)) < 1e-8);
    }
}

TEST_CASE("log density matches an independent evaluation") {
    Rng rng(9);
    for (Index d : {2, 3}) {
        for (int rep = 0; rep < 10; ++rep) {
            const WgParams th = random_theta(rng, d, rep % 2 ? CovKind::Diagonal : CovKind::Full);
            const SpdMat x = testing::random_spd(rng, d, 0.6);
            const Matrix l = ref_log_map(th.p.matrix(), x.matrix());
            const Matrix pis = ref_sqrt(th.p.matrix()).inverse();
            const Vector t = ref_vect_identity(pis * l * pis);
            const double ref = ref_mvn_logpdf(t, th.mu, th.sigma.dense()) - std::log(fd_jacobian(th.p.matrix(), l));
            CHECK(std::abs(log_density(th, x) - ref) < 1e-5);
        }
    }
}

TEST_CASE("elliptically contoured generators") {
    Rng rng(10);
    const WgParams th = random_theta(rng, 2);
    for (int rep = 0; rep < 10; ++rep) {
        const SpdMat x = testing::random_spd(rng, 2);
        CHECK(log_density_ec(th, EcGenerator::gaussian(), x) == log_density(th, x));
        CHECK(std::abs(log_density_ec(th, EcGenerator::student_t(1e6), x) - log_density(th, x)) < 1e-4);
        CHECK(std::isfinite(log_density_ec(th, EcGenerator::student_t(3), x)));
    }
    CHECK(EcGenerator::gaussian().log_g(2.0, 3) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(EcGenerator::student_t(0.0), InvalidInput);
    CHECK_THROWS_AS(EcGenerator::student_t(-1.0), InvalidInput);
}

TEST_CASE("student-t normalizer integrates to one") {
    // Radial integral of k g(r^2) over R^n: S_{n-1} int_0^inf r^{n-1} k g(r^2) dr,
    // via the substitution r = tan(a) on [0, pi/2) and composite Simpson.
    for (double nu : {1.5, 3.0, 10.0}) {
        for (Index n : {1, 3, 6}) {
            const EcGenerator g = EcGenerator::student_t(nu);
            const double surface =
                2.0 * std::pow(std::numbers::pi, 0.5 * static_cast<double>(n)) / std::tgamma(0.5 * static_cast<double>(n));
            const int m = 200000;
            const double a_max = 0.5 * std::numbers::pi;
            const double h = a_max / m;
            double s = 0.0;
            for (int i = 0; i <= m; ++i) {
                const double a = i * h;
                double f = 0.0;
                if (i < m) {
                    const double r = std::tan(a);
                    const double c = std::cos(a);
                    f = std::pow(r, static_cast<double>(n - 1)) * std::exp(g.log_normalizer(n) + g.log_g(r * r, n)) / (c * c);
                }
                s += (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
            }
            CHECK(surface * s * h / 3.0 == doctest::Approx(1.0).epsilon(2e-4));
        }
    }
}

TEST_CASE("class translation and minimal representative") {
    const SpdMat i2 = SpdMat::identity(2);
    Rng rng(11);
    const Matrix a = rng.normal_matrix(3, 3);
    const CovSpec s = CovSpec::full(SpdMat(SymMat::symmetrize(a * a.transpose() + Matrix::Identity(3, 3))));
    const WgParams th(i2, (Vector(3) << 1, 0, 1).finished(), s);
    const WgParams t1 = translate_class(th, 1.0);
    CHECK(rel_fro(t1.p.matrix(), e * Matrix::Identity(2, 2)) < 1e-15);
    CHECK(t1.mu.norm() < 1e-15);
    CHECK(t1.sigma == s);
    const WgParams t0 = translate_class(th, 0.0);
    CHECK(t0.p.matrix() == th.p.matrix());
    CHECK(t0.mu == th.mu);

    const WgParams th2(i2, (Vector(3) << 2, 0, 0).finished(), s);
    const WgParams m = minimal_representative(th2);
    CHECK(rel_fro(m.p.matrix(), e * Matrix::Identity(2, 2)) < 1e-15);
    CHECK((m.mu - (Vector(3) << 1, 0, -1).finished()).norm() < 1e-15);
    CHECK(m.mu.norm() == doctest::Approx(std::sqrt(2.0)));
    CHECK(m.sigma == s);

    const WgParams already(i2, (Vector(3) << 1, 5, -1).finished(), s);
    const WgParams am = minimal_representative(already);
    CHECK(am.p.matrix() == already.p.matrix());
    CHECK(am.mu == already.mu);
}

TEST_CASE("minimal representative properties") {
    Rng rng(12);
    for (Index d = 2; d <= 6; ++d) {
        for (int rep = 0; rep < 10; ++rep) {
            const WgParams th = random_theta(rng, d, CovKind::Diagonal, 1.0);
            const WgParams m = minimal_representative(th);
            const Vector nu = nu_vector(m.p).coords();
            CHECK(std::abs(m.mu.dot(nu)) < 1e-12);
            for (double t : {-1.0, -0.1, 0.1, 1.0}) CHECK(m.mu.norm() <= (m.mu - t * nu).norm());
            const WgParams mm = minimal_representative(m);
            CHECK(mm.p.matrix() == m.p.matrix());
            CHECK(mm.mu == m.mu);
            // Same class: densities agree.
            const SpdMat x = testing::random_spd(rng, d);
            CHECK(std::abs(log_density(th, x) - log_density(m, x)) < 1e-8);
        }
    }
}

TEST_CASE("standardizing transforms") {
    Rng rng(13);
    const WgParams std_theta(SpdMat::identity(2), Vector::Zero(3), CovSpec::identity(3));
    for (int rep = 0; rep < 5; ++rep) {
        const SpdMat x = testing::random_spd(rng, 2);
        CHECK(rel_fro(standardize_map(std_theta, x, Direction::FromStandard).matrix(), x.matrix()) < 1e-12);
        CHECK(rel_fro(standardize_map(std_theta, x, Direction::ToStandard).matrix(), x.matrix()) < 1e-12);
    }
    for (CovKind kind : {CovKind::Full, CovKind::Diagonal}) {
        const WgParams th = random_theta(rng, 3, kind);
        for (int rep = 0; rep < 10; ++rep) {
            const SpdMat x = testing::random_spd(rng, 3);
            const SpdMat y = standardize_map(th, standardize_map(th, x, Direction::FromStandard), Direction::ToStandard);
            CHECK(rel_fro(y.matrix(), x.matrix()) < 1e-9);
            for (bool inv : {false, true}) {
                CHECK(rel_fro(transforms::congruence(th.p, transforms::congruence(th.p, x, inv), !inv).matrix(),
                              x.matrix()) < 1e-9);
                CHECK(rel_fro(transforms::tangent_translate(th.p, th.mu,
                                                            transforms::tangent_translate(th.p, th.mu, x, inv), !inv)
                                  .matrix(),
                              x.matrix()) < 1e-9);
                CHECK(rel_fro(transforms::tangent_scale(th.p, th.sigma,
                                                        transforms::tangent_scale(th.p, th.sigma, x, inv), !inv)
                                  .matrix(),
                              x.matrix()) < 1e-9);
            }
        }
    }
}

TEST_CASE("standardizing transforms act on distributions as stated") {
    Rng rng(14);
    const WgParams th = random_theta(rng, 2);
    const std::size_t N = 10000;
    const auto xs = sample(th, N, 15);
    const SpdMat id = SpdMat::identity(2);
    Vector m1 = Vector::Zero(3), m2 = Vector::Zero(3);
    Matrix c2 = Matrix::Zero(3, 3);
    std::vector<Vector> z;
    for (const auto& x : xs) {
        m1 += unwrap_point(id, transforms::congruence(th.p, x));
        const Vector s = unwrap_point(id, standardize_map(th, x, Direction::ToStandard));
        m2 += s;
        c2 += s * s.transpose();
    }
    m1 /= static_cast<double>(N);
    m2 /= static_cast<double>(N);
    c2 /= static_cast<double>(N);
    const Matrix sd = th.sigma.dense();
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(m1(i) - th.mu(i)) < 4.0 * std::sqrt(sd(i, i) / N));
    CHECK(m2.norm() < 4.0 * std::sqrt(3.0 / N));
    CHECK((c2 - Matrix::Identity(3, 3)).norm() < 0.06);

    // From the standard law to theta.
    const WgParams unit(id, Vector::Zero(3), CovSpec::identity(3));
    Vector m3 = Vector::Zero(3);
    for (const auto& x : sample(unit, N, 16)) m3 += unwrap_point(th.p, standardize_map(th, x, Direction::FromStandard));
    m3 /= static_cast<double>(N);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(m3(i) - th.mu(i)) < 4.0 * std::sqrt(sd(i, i) / N));
}

TEST_CASE("clt statistic") {
    Rng rng(17);
    const SpdMat base = testing::random_spd(rng, 2);
    const SpdMat m = testing::random_spd(rng, 2);
    const std::vector<SpdMat> same(7, m);
    CHECK(rel_fro(clt_statistic(same, unwrap_point(base, m), base).matrix(), base.matrix()) < 1e-10);

    const std::vector<SpdMat> one{SpdMat::identity(2).scaled(e * e)};
    CHECK(rel_fro(clt_statistic(one, Vector::Zero(3)).matrix(), e * e * Matrix::Identity(2, 2)) < 1e-13);
    CHECK_THROWS_AS(clt_statistic(std::vector<SpdMat>{}, Vector::Zero(3)), InvalidInput);

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<SpdMat> xs;
        for (int i = 0; i < 9; ++i) xs.push_back(testing::random_spd(rng, 3, 0.5));
        const Vector mu = rng.normal_vector(6) * 0.2;
        CHECK(rel_fro(clt_statistic_power_form(xs, mu).matrix(), clt_statistic(xs, mu).matrix()) < 1e-9);
        CHECK(rel_fro(clt_statistic(xs, mu, SpdMat::identity(3)).matrix(), clt_statistic(xs, mu).matrix()) < 1e-12);
    }
}

TEST_CASE("mean property: a mean of WG(p; 0, Sigma) is p") {
    Rng rng(18);
    const WgParams th(testing::random_spd(rng, 2), Vector::Zero(3), random_theta(rng, 2).sigma);
    const std::size_t N = 100000;
    Vector m = Vector::Zero(3);
    for (const auto& x : sample(th, N, 19)) m += unwrap_point(th.p, x);
    m /= static_cast<double>(N);
    CHECK(m.norm() <= 4.0 * std::sqrt(th.sigma.dense().trace() / N));
}
