#include "cocyclab/errors.hpp"
#include "cocyclab/fixtures.hpp"
#include "cocyclab/oseledets.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>

using namespace cocyclab;

namespace {

Matrix m2(double a, double b, double c, double d)
{
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Matrix diag_exp(double t) { return m2(std::exp(t), 0, 0, std::exp(-t)); }

// u -> diag(e, 1/e), v -> its inverse, u with probability p.
struct DiagWalk {
    SymbolicSystem system;
    CocycleSpec cocycle;
    explicit DiagWalk(double p)
        : system(SymbolicSystem::bernoulli({"u", "v"}, {p, 1.0 - p})),
          cocycle(CocycleSpec::from_table(system, 1, 1, {{"u", diag_exp(1.0)}, {"v", diag_exp(-1.0)}}))
    {
    }
};

struct Sl2z {
    SymbolicSystem system = SymbolicSystem::from_json(sl2z_system(1));
    CocycleSpec cocycle = CocycleSpec::from_json(sl2z_cocycle(), system);
};

} // namespace

TEST_CASE("constant diagonal cocycle: exponents are exact with zero stderr")
{
    DiagWalk w(1.0);
    const Spectrum s = lyapunov_spectrum(w.cocycle, w.system, 1000, 4, 1);
    CHECK(s.exponents[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(s.exponents[1] == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(s.stderrs[0] == 0.0);
    CHECK(s.classification == Classification::simple);
    CHECK(s.multiplicities == std::vector<int>{1, 1});
}

TEST_CASE("diagonal random walk: top exponent is |2p - 1|")
{
    DiagWalk w(0.75);
    const Spectrum s = lyapunov_spectrum(w.cocycle, w.system, 20000, 16, 2);
    CHECK(std::abs(s.exponents[0] - 0.5) < 4.0 * s.stderrs[0]);
    CHECK(std::abs(s.trace()) <= s.trace_tolerance());
    CHECK(s.classification == Classification::simple);

    DiagWalk fair(0.5);
    const Spectrum z = lyapunov_spectrum(fair.cocycle, fair.system, 20000, 16, 3);
    CHECK(z.classification == Classification::degenerate);
    CHECK(z.multiplicities == std::vector<int>{2});
}

TEST_CASE("summarize_spectrum classifies synthetic ensembles")
{
    // Resolved gap.
    std::vector<std::vector<double>> sharp = {{1.0, -1.0}, {1.1, -1.1}, {0.9, -0.9}};
    CHECK(summarize_spectrum(sharp, 100).classification == Classification::simple);
    // Exponents are sorted by column mean.
    std::vector<std::vector<double>> swapped = {{-1.0, 1.0}, {-1.1, 1.1}, {-0.9, 0.9}};
    const Spectrum s = summarize_spectrum(swapped, 100);
    CHECK(s.exponents[0] == doctest::Approx(1.0));
    CHECK(s.members[0][0] == 1.0);
    // Noise around zero is degenerate.
    std::vector<std::vector<double>> flat = {{0.01, -0.01}, {-0.01, 0.01}, {0.02, -0.02}, {-0.02, 0.02}};
    CHECK(summarize_spectrum(flat, 100).classification == Classification::degenerate);
    // lambda_1 > 0 resolved, but lambda_2 = lambda_3 unresolved.
    std::vector<std::vector<double>> partial = {
        {1.0, -0.49, -0.51}, {1.0, -0.51, -0.49}, {1.0, -0.5, -0.5}, {1.01, -0.52, -0.49}};
    const Spectrum p = summarize_spectrum(partial, 100);
    CHECK(p.classification == Classification::non_degenerate);
    CHECK(p.multiplicities == std::vector<int>{1, 2});
    CHECK_THROWS(summarize_spectrum({}, 1));
}

TEST_CASE("qr_log_growth of a constant triangular factor is n log|diagonal|")
{
    const Matrix t = m2(2.0, 1.0, 0.0, 0.5);
    const long n = 500;
    const Vector g = qr_log_growth(2, n, [&](long) -> const Matrix& { return t; });
    CHECK(g(0) / n == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(g(1) / n == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("QR spectrum of the SL2(Z) walk agrees with the norm-growth oracle")
{
    Sl2z s;
    const Spectrum q = lyapunov_spectrum(s.cocycle, s.system, 5000, 16, 4);
    const NormGrowth o = norm_growth_oracle(s.cocycle, s.system, 5000, 16, 5);
    CHECK(std::abs(q.exponents[0] - o.estimate) < 2.0 * (q.stderrs[0] + o.stderr_) + 0.02);
    CHECK(q.exponents[0] > 0.2);
    CHECK(std::abs(q.trace()) <= q.trace_tolerance());
    CHECK_THROWS_AS(lyapunov_spectrum(s.cocycle, s.system, 10, 4, 1), ValidationError);
}

TEST_CASE("Cartan projection matches singular values of the assembled product")
{
    Sl2z s;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        OrbitWindow x(s.system, seed);
        x.extend(0, 20);
        const Matrix p = evaluate_naive(s.cocycle, x, 12);
        const Eigen::JacobiSVD<Matrix> svd(p);
        const Vector cart = cartan_projection(evaluate_graded(s.cocycle, x, 12));
        for (int i = 0; i < 2; ++i) {
            CHECK(cart(i) == doctest::Approx(std::log(svd.singularValues()(i))).epsilon(1e-9));
        }
    }
}

TEST_CASE("Cartan projection stays finite where the assembled product overflows")
{
    DiagWalk w(1.0);
    OrbitWindow x(w.system, 1);
    x.extend(0, 2001);
    const Vector cart = cartan_projection(evaluate_graded(w.cocycle, x, 2000));
    CHECK(cart(0) == doctest::Approx(2000.0).epsilon(1e-12));
    CHECK(cart(1) == doctest::Approx(-2000.0).epsilon(1e-12));
}

TEST_CASE("rotation cocycle has no gap: flags raise InsufficientGap")
{
    const auto sys = SymbolicSystem::bernoulli({"u", "v"}, {0.5, 0.5});
    const auto c = CocycleSpec::from_table(
        sys, 1, 1, {{"u", m2(std::cos(1.0), -std::sin(1.0), std::sin(1.0), std::cos(1.0))},
                    {"v", m2(std::cos(1.0), std::sin(1.0), -std::sin(1.0), std::cos(1.0))}});
    OrbitWindow x(sys, 3);
    CHECK_THROWS_AS(oseledets_flags(c, x, 500), InsufficientGap);
    CHECK_THROWS_AS(equivariance_check(c, sys, 200, 4, 1), InsufficientGap);
}

TEST_CASE("constant diagonal cocycle: flags are the coordinate flags")
{
    DiagWalk w(1.0);
    OrbitWindow x(w.system, 5);
    const OseledetsFlags f = oseledets_flags(w.cocycle, x, 50);
    CHECK(flag_distance(f.psi_minus, Flag::standard(2)) < 1e-12);
    CHECK(flag_distance(f.psi_plus, Flag::reversed(2)) < 1e-12);
    CHECK(f.transversality == doctest::Approx(1.0));
    const OseledetsFrame fr = frame(w.cocycle, x, 50);
    CHECK(fr.off_diagonal_mass < 1e-12);
    CHECK(std::abs(fr.conjugated(0, 0)) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("SL2(Z) flags are equivariant and the frame diagonalizes the cocycle")
{
    Sl2z s;
    const EquivarianceReport e = equivariance_check(s.cocycle, s.system, 200, 32, 6);
    CHECK(e.median < 1e-8);
    CHECK(e.transverse_fraction > 0.9);
    CHECK(e.insufficient_gap_fraction < 0.1);

    const FrameReductionReport r = frame_reduction_check(s.cocycle, s.system, 200, 500, 8, 7);
    CHECK(r.median_off_diagonal < 1e-8);
    const Spectrum q = lyapunov_spectrum(s.cocycle, s.system, 5000, 16, 8);
    // Orbit averages of log|D_ii| recover the exponents.
    for (int i = 0; i < 2; ++i) {
        const double sigma = std::hypot(r.diagonal_stderrs[i], q.stderrs[i]);
        CHECK(std::abs(r.diagonal_means[i] - q.exponents[i]) < 4.0 * sigma + 0.01);
    }
}

TEST_CASE("inducing on the full set reproduces the base spectrum")
{
    Sl2z s;
    const auto r = induced_spectrum_check(s.cocycle, s.system, Indicator::always(), 2000, 8, 9, 1000);
    CHECK(r.expected_ratio == 1.0);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(r.induced.exponents[i] == r.base.exponents[i]);
    }
    CHECK(r.max_relative_deviation == 0.0);
}

TEST_CASE("inducing on a cylinder rescales exponents by 1 / m(A)")
{
    Sl2z s;
    const auto ind = Indicator::from_json(nlohmann::json::parse(R"({"0": "A"})"), s.system);
    const auto r = induced_spectrum_check(s.cocycle, s.system, ind, 5000, 16, 10, 20000);
    CHECK(std::abs(r.measured_mass - 0.25) < 4.0 * r.mass_stderr);
    CHECK(r.max_relative_deviation < 0.05);
    CHECK(r.kac.z < 4.0);
}

TEST_CASE("skew spectrum with a z-independent rho equals the base spectrum")
{
    DiagWalk w(1.0);
    auto skew = SkewSystem::from_json(nlohmann::json::parse(R"({"z_size": 2, "perms": {"u": [1, 0], "v": [0, 1]},
        "rho": {"u": [[[2, 0], [0, 0.5]], [[2, 0], [0, 0.5]]], "v": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}})"),
                                      w.system);
    const Spectrum s = skew_lyapunov_spectrum(skew, 200, 4, 1);
    CHECK(s.exponents[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(s.exponents[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}
