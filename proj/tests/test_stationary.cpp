#include "cocyclab/errors.hpp"
#include "cocyclab/fixtures.hpp"
#include "cocyclab/oseledets.hpp"
#include "cocyclab/stationary.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cocyclab;

namespace {

Matrix m2(double a, double b, double c, double d)
{
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Flag line_flag(double theta) { return Flag::from_basis(m2(std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta))); }

// Equal-weight flags whose lines are equidistributed in angle on P^1.
EmpiricalMeasure uniform_p1(int n)
{
    std::vector<Flag> flags;
    for (int i = 0; i < n; ++i) {
        flags.push_back(line_flag((i + 0.5) * M_PI / n));
    }
    return EmpiricalMeasure(flags);
}

Matrix col(std::initializer_list<double> v)
{
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) {
        m(i++, 0) = x;
    }
    return m;
}

struct Sl2z {
    SymbolicSystem system = SymbolicSystem::from_json(sl2z_system(1));
    CocycleSpec cocycle = CocycleSpec::from_json(sl2z_cocycle(), system);
};

} // namespace

TEST_CASE("empirical measure: weights are validated and equal flags merge")
{
    const Flag a = Flag::standard(2);
    const Flag b = Flag::reversed(2);
    const EmpiricalMeasure m({a, a, b, a});
    CHECK(m.atoms().size() == 2);
    CHECK(m.sample_count() == 4);
    CHECK(m.max_weight() == 0.75);
    CHECK_THROWS_AS(EmpiricalMeasure({{a, 0.5}, {b, 0.6}}, 2), ValidationError);
    CHECK_THROWS_AS(EmpiricalMeasure({{a, 1.5}, {b, -0.5}}, 2), ValidationError);
    const auto back = EmpiricalMeasure::from_json(m.to_json());
    CHECK(back.atoms().size() == 2);
    CHECK(back.max_weight() == 0.75);
}

TEST_CASE("pushforward moves atoms by the linear action and keeps weights")
{
    const EmpiricalMeasure m = uniform_p1(16);
    const Matrix g = m2(2.0, 1.0, 1.0, 1.0);
    const Matrix h = m2(1.0, -1.0, 0.0, 1.0);
    const EmpiricalMeasure gh = m.pushforward(g * h);
    const EmpiricalMeasure g_h = m.pushforward(h).pushforward(g);
    REQUIRE(gh.atoms().size() == g_h.atoms().size());
    for (std::size_t i = 0; i < gh.atoms().size(); ++i) {
        CHECK(flag_distance(gh.atoms()[i].flag, g_h.atoms()[i].flag) < 1e-12);
        CHECK(gh.atoms()[i].weight == m.atoms()[i].weight);
    }
}

TEST_CASE("identical samples compare with z = 0")
{
    std::vector<Flag> s;
    for (int i = 0; i < 10; ++i) {
        s.push_back(random_flag(3, i));
    }
    const PanelComparison c = compare_samples(s, s);
    CHECK(c.max_z == 0.0);
}

TEST_CASE("distance to a locus is the principal angle to the subspace")
{
    // d = 2: the locus of W = span(w) is the single line w.
    CHECK(distance_to_locus(line_flag(0.3), col({1, 0})) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(distance_to_locus(line_flag(0.3), col({3, 0})) == doctest::Approx(0.3).epsilon(1e-14));
    // d = 3, W a line: the plane E_2 meets W at angle asin(|<w, normal>|).
    const Flag f = Flag::standard(3);
    CHECK(distance_to_locus(f, col({0, std::cos(0.2), std::sin(0.2)})) == doctest::Approx(0.2).epsilon(1e-14));
    // d = 3, W a plane: it always meets the line E_1 only if it contains it.
    Matrix plane(3, 2);
    plane << 0, 0, 1, 0, 0, 1;
    CHECK(distance_to_locus(f, plane) == doctest::Approx(M_PI / 2));
    CHECK_THROWS_AS(distance_to_locus(f, Matrix::Identity(3, 3)), ValidationError);
    CHECK_THROWS_AS(distance_to_locus(f, Matrix::Zero(3, 1)), ValidationError);
}

TEST_CASE("uniform measure on P^1 is proper with exponent 1")
{
    const EmpiricalMeasure nu = uniform_p1(4000);
    const std::vector<double> eps = {0.4, 0.2, 0.1, 0.05, 0.025};
    const ProperFit fit = properness_profile(nu, {col({1, 0}), col({1, 1})}, eps);
    CHECK(fit.proper);
    for (const auto& p : fit.profiles) {
        // Exact mass of an eps-neighbourhood is 2 eps / pi.
        for (std::size_t i = 0; i < eps.size(); ++i) {
            CHECK(std::abs(p.masses[i] - 2.0 * eps[i] / M_PI) < 2.0 / 4000);
        }
        CHECK(p.ci_low < 1.0);
        CHECK(p.ci_high > 1.0);
    }
    CHECK_THROWS_AS(properness_profile(nu, {col({1, 0})}, {0.1, 0.2}), ValidationError);
}

TEST_CASE("a Dirac measure on a locus is not proper")
{
    std::vector<Flag> flags(500, Flag::standard(2));
    const ProperFit fit = properness_profile(EmpiricalMeasure(flags), {col({1, 0})}, {0.2, 0.1, 0.05});
    CHECK_FALSE(fit.proper);
    CHECK(fit.max_weight == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Furstenberg formula is exact for a constant diagonal walk")
{
    const auto sys = SymbolicSystem::bernoulli({"u", "v"}, {1.0, 0.0});
    const auto c = CocycleSpec::from_table(sys, 1, 1, {{"u", m2(2.0, 0.0, 0.0, 0.5)}});
    const StationaryEstimate st = estimate_stationary(c, sys, 100, 50, 1);
    CHECK(flag_distance(st.measure.atoms().front().flag, Flag::standard(2)) < 1e-12);
    const FurstenbergEstimate f = furstenberg_top_exponent(c, sys, st.measure);
    CHECK(f.estimate == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("SL2(Z) stationary measure is refresh-invariant and satisfies Furstenberg")
{
    Sl2z s;
    const StationaryEstimate st = estimate_stationary(s.cocycle, s.system, 200, 2000, 2);
    CHECK(st.refresh.max_z < 4.0);
    const FurstenbergEstimate f = furstenberg_top_exponent(s.cocycle, s.system, st.measure);
    const Spectrum q = lyapunov_spectrum(s.cocycle, s.system, 10000, 16, 3);
    CHECK(std::abs(f.estimate - q.exponents[0]) < 4.0 * std::hypot(f.stderr_, q.stderrs[0]) + 0.005);
}

TEST_CASE("reducible upper-triangular walk concentrates on the invariant line")
{
    const auto sys = SymbolicSystem::bernoulli({"p", "q"}, {0.5, 0.5});
    const auto c = CocycleSpec::from_table(sys, 1, 1, {{"p", m2(2.0, 1.0, 0.0, 0.5)}, {"q", m2(0.5, 1.0, 0.0, 2.0)}});
    const StationaryEstimate st = estimate_stationary(c, sys, 200, 500, 4);
    // e_1 is fixed by every generator, so the standard flag is a fixed atom.
    CHECK(st.measure.max_weight() == doctest::Approx(1.0).epsilon(1e-12));
    const ProperFit fit = properness_profile(st.measure, {col({1, 0}), col({0, 1})}, {0.2, 0.1, 0.05});
    CHECK_FALSE(fit.proper);
    CHECK(furstenberg_top_exponent(c, sys, st.measure).estimate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("harmonic family: nu_-(x) is a martingale in the past")
{
    Sl2z s;
    OrbitWindow x(s.system, 5);
    const HarmonicFamily h = harmonic_family(s.cocycle, x, 200, 200, 6);
    CHECK(h.samples.size() == 200);
    CHECK(h.pushed.size() == 200);
    CHECK(h.martingale.max_z < 4.0);
}

TEST_CASE("backward products contract a stationary measure to a Dirac mass at psi_-")
{
    Sl2z s;
    const StationaryEstimate st = estimate_stationary(s.cocycle, s.system, 200, 500, 7);
    OrbitWindow x(s.system, 8);
    const ContractionCurve curve = dirac_contraction(s.cocycle, x, st.measure, {25, 50, 100, 200});
    REQUIRE(curve.points.size() == 4);
    CHECK(curve.points.back().diameter < 0.01);
    CHECK(flag_distance(curve.points.back().center, psi_minus(s.cocycle, x, 200)) < 1e-6);
    std::ostringstream out;
    write_contraction_csv(out, curve);
    CHECK(out.str().rfind("n,", 0) == 0);
}

TEST_CASE("Dirac contraction comes with diverging roots of the Cartan projection")
{
    Sl2z s;
    OrbitWindow x(s.system, 9);
    const GrowthTable t = contraction_growth_check(s.cocycle, x, {50, 100, 200, 400});
    CHECK(t.rows.back().roots(0) > t.rows.front().roots(0));
    const GrowthRateEstimate g = growth_rates(s.cocycle, s.system, 400, 32, 10);
    const Spectrum q = lyapunov_spectrum(s.cocycle, s.system, 10000, 16, 11);
    // For SL_2 the only root rate is lambda_1 - lambda_2 = 2 lambda_1.
    const double gap = q.exponents[0] - q.exponents[1];
    CHECK(std::abs(g.root_rates[0] - gap) < 4.0 * std::hypot(g.stderrs[0], q.gap_stderrs[0]) + 0.02);
}
