#include "cocyclab/dynamics.hpp"
#include "cocyclab/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace cocyclab;

namespace {

SymbolicSystem coin(double p, std::uint64_t seed = 1)
{
    return SymbolicSystem::bernoulli({"a", "b"}, {p, 1.0 - p}, seed);
}

std::vector<Symbol> symbols(const OrbitWindow& w, long lo, long hi)
{
    std::vector<Symbol> out;
    for (long i = lo; i <= hi; ++i) {
        out.push_back(w.at(i));
    }
    return out;
}

} // namespace

TEST_CASE("sample_orbit is deterministic for a fixed seed")
{
    const auto sys = coin(0.5);
    const auto a = sample_orbit(sys, 7, 0, 10);
    const auto b = sample_orbit(sys, 7, 0, 10);
    CHECK(symbols(a, 0, 10) == symbols(b, 0, 10));
    const auto c = sample_orbit(sys, 8, 0, 10);
    CHECK(symbols(a, 0, 10) != symbols(c, 0, 10));
}

TEST_CASE("extension never changes materialized symbols")
{
    for (const auto& sys :
         {coin(0.3), SymbolicSystem::markov({"a", "b", "c"}, (Matrix(3, 3) << 0.1, 0.6, 0.3, 0.5, 0.2, 0.3, 0.3, 0.3, 0.4)
                                                                   .finished())}) {
        OrbitWindow w(sys, 11);
        w.extend(-5, 5);
        const auto before = symbols(w, -5, 5);
        w.extend(-500, 700);
        CHECK(symbols(w, -5, 5) == before);
        // Materializing in a different order gives the same point.
        OrbitWindow v(sys, 11);
        v.extend(0, 700);
        v.extend(-500, 0);
        CHECK(symbols(v, -500, 700) == symbols(w, -500, 700));
    }
}

TEST_CASE("shift re-indexes exactly")
{
    const auto sys = coin(0.5);
    const auto x = sample_orbit(sys, 3, -50, 50);
    const auto y = x.shifted(7);
    for (long i = -57; i <= 43; ++i) {
        CHECK(y.at(i) == x.at(i + 7));
    }
    CHECK_THROWS_AS((void)y.at(44), WindowTooSmall);
}

TEST_CASE("identity Markov chain is absorbing")
{
    const auto sys = SymbolicSystem::markov({"a", "b"}, Matrix::Identity(2, 2), std::vector<double>{1.0, 0.0});
    const auto x = sample_orbit(sys, 5, -100, 100);
    for (long i = -100; i <= 100; ++i) {
        CHECK(x.at(i) == 0);
    }
}

TEST_CASE("Markov stationary vector is solved and checked")
{
    Matrix p(2, 2);
    p << 0.9, 0.1, 0.3, 0.7;
    const auto sys = SymbolicSystem::markov({"a", "b"}, p);
    // pi = (0.75, 0.25) solves pi P = pi.
    CHECK(sys.marginal()[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(SymbolicSystem::markov({"a", "b"}, p, std::vector<double>{0.5, 0.5}), ValidationError);
    Matrix bad = p;
    bad(0, 0) = 0.8;
    CHECK_THROWS_AS(SymbolicSystem::markov({"a", "b"}, bad), ValidationError);
}

TEST_CASE("Bernoulli probabilities are validated")
{
    CHECK_THROWS_AS(SymbolicSystem::bernoulli({"a", "b"}, {0.6, 0.5}), ValidationError);
    CHECK_THROWS_AS(SymbolicSystem::bernoulli({"a", "b"}, {1.1, -0.1}), ValidationError);
    CHECK_THROWS_AS(SymbolicSystem::bernoulli({"a"}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(SymbolicSystem::from_json(nlohmann::json::parse(R"({"kind":"levy","alphabet":["a"]})")),
                    ValidationError);
}

TEST_CASE("Bernoulli symbol frequency lies in the binomial interval")
{
    const auto sys = coin(0.5);
    const long n = 100000;
    const auto x = sample_orbit(sys, 2024, 0, n - 1);
    long count = 0;
    for (long i = 0; i < n; ++i) {
        count += x.at(i) == 0 ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(count) / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("Markov transitions match the transition matrix in both time directions")
{
    Matrix p(2, 2);
    p << 0.9, 0.1, 0.3, 0.7;
    const auto sys = SymbolicSystem::markov({"a", "b"}, p);
    OrbitWindow x(sys, 17);
    x.extend(-100000, 100000);
    long from_a = 0;
    long a_to_b = 0;
    for (long i = -100000; i < 100000; ++i) {
        if (x.at(i) == 0) {
            ++from_a;
            a_to_b += x.at(i + 1) == 1 ? 1 : 0;
        }
    }
    const double f = static_cast<double>(a_to_b) / from_a;
    CHECK(std::abs(f - 0.1) < 4.0 * std::sqrt(0.09 / from_a));
}

TEST_CASE("cylinder measure of product and Markov laws")
{
    const auto sys = coin(0.7);
    CHECK(sys.cylinder_measure({{0, 0}, {1, 0}}) == doctest::Approx(0.49));
    CHECK(sys.cylinder_measure({{0, 0}, {5, 1}}) == doctest::Approx(0.21));
    Matrix p(2, 2);
    p << 0.9, 0.1, 0.3, 0.7;
    const auto mk = SymbolicSystem::markov({"a", "b"}, p);
    CHECK(mk.cylinder_measure({{0, 0}, {1, 1}}) == doctest::Approx(0.75 * 0.1));
    // Two steps: P^2(a, a) = 0.81 + 0.03.
    CHECK(mk.cylinder_measure({{0, 0}, {2, 0}}) == doctest::Approx(0.75 * 0.84));
}

TEST_CASE("first return to the full set is 1")
{
    const auto sys = coin(0.5);
    const Indicator all = Indicator::always();
    for (std::uint64_t s = 0; s < 20; ++s) {
        OrbitWindow x(sys, s);
        CHECK(first_return(all, x) == 1);
    }
}

TEST_CASE("Kac: mean return time to {x_0 = a} is 1 / m = 2")
{
    const auto sys = coin(0.5);
    const Indicator ind = Indicator::cylinder({{0, 0}});
    const InducedSystem induced = induce(sys, ind, 10000, 1);
    const MeanEstimate ret = induced.mean_return(10000, 2);
    CHECK(std::abs(ret.mean - 2.0) < 3.0 * ret.stderr_);
    CHECK(std::abs(induced.measured_mass() - 0.5) < 3.0 * induced.mass_stderr());
    const KacCheck k = kac_check(induced, ret);
    CHECK(k.z < 3.0);
}

TEST_CASE("Kac holds on a Markov chain")
{
    Matrix p(3, 3);
    p << 0.1, 0.6, 0.3, 0.5, 0.2, 0.3, 0.3, 0.3, 0.4;
    const auto sys = SymbolicSystem::markov({"a", "b", "c"}, p);
    const Indicator ind = Indicator::cylinder({{0, 2}});
    const InducedSystem induced = induce(sys, ind, 20000, 3);
    const MeanEstimate ret = induced.mean_return(20000, 4);
    CHECK(kac_check(induced, ret).z < 3.0);
    const double exact = *ind.exact_measure(sys);
    CHECK(std::abs(ret.mean - 1.0 / exact) < 3.0 * ret.stderr_);
}

TEST_CASE("first return beyond the cap raises ReturnCapExceeded")
{
    Matrix p(2, 2);
    p << 0.0, 1.0, 0.0, 1.0;
    const auto sys = SymbolicSystem::markov({"a", "b"}, p, std::vector<double>{0.0, 1.0});
    OrbitWindow x = OrbitWindow::pinned(sys, 1, 0);
    CHECK_THROWS_AS(first_return(Indicator::cylinder({{0, 0}}), x, 0, 100), ReturnCapExceeded);
}

TEST_CASE("induce on the full set is the identity inducing")
{
    const auto sys = coin(0.5);
    const InducedSystem induced = induce(sys, Indicator::always(), 100, 5);
    CHECK(induced.measured_mass() == 1.0);
    OrbitWindow x = induced.sample_point(9);
    const auto times = induced.return_times(x, 50);
    for (long t : times) {
        CHECK(t == 1);
    }
    // Candidate 0 is the plain window for the seed.
    OrbitWindow plain(sys, 9);
    plain.extend(0, 20);
    for (long i = 0; i <= 20; ++i) {
        CHECK(x.at(i) == plain.at(i));
    }
}

TEST_CASE("measured mass of two-letter cylinder is 1/4")
{
    const auto sys = coin(0.5);
    const InducedSystem induced = induce(sys, Indicator::cylinder({{0, 0}, {1, 0}}), 20000, 6);
    CHECK(std::abs(induced.measured_mass() - 0.25) < 3.0 * induced.mass_stderr());
}

TEST_CASE("induce on an empty indicator raises EmptyIndicator")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "b"}, {1.0, 0.0});
    CHECK_THROWS_AS(induce(sys, Indicator::cylinder({{0, 1}}), 1000, 1), EmptyIndicator);
}

TEST_CASE("indicator JSON refers to symbols by name")
{
    const auto sys = coin(0.5);
    const auto ind = Indicator::from_json(nlohmann::json::parse(R"({"0": "a", "2": "b"})"), sys);
    CHECK(ind.lo() == 0);
    CHECK(ind.hi() == 2);
    CHECK(*ind.exact_measure(sys) == doctest::Approx(0.25));
    CHECK_THROWS_AS(Indicator::from_json(nlohmann::json::parse(R"({"x": "a"})"), sys), ValidationError);
    CHECK_THROWS_AS(Indicator::from_json(nlohmann::json::parse(R"({"0": "z"})"), sys), ValidationError);
    CHECK(Indicator::from_json(nlohmann::json::object(), sys).is_always());
}

TEST_CASE("Birkhoff average of a constant is exact")
{
    const auto st = birkhoff(coin(0.5), Observable::constant(2.5), 1000, 16, 1);
    CHECK(st.mean == 2.5);
    CHECK(st.stderr_ == 0.0);
}

TEST_CASE("Birkhoff average of a symmetric observable is 0")
{
    const auto st = birkhoff(coin(0.5), Observable::symbol_weights(0, {1.0, -1.0}), 10000, 32, 2);
    CHECK(std::abs(st.mean) < 3.0 * st.stderr_);
}

TEST_CASE("Birkhoff average with positive drift: mean 0.7 and final partial sums positive")
{
    const auto st = birkhoff(coin(0.7), Observable::symbol_weights(0, {1.0, 0.0}), 10000, 32, 3);
    CHECK(std::abs(st.mean - 0.7) < 3.0 * st.stderr_);
    // h - 0.5 has positive integral, so its partial sums drift to +infinity.
    const auto drift = birkhoff(coin(0.7), Observable::symbol_weights(0, {0.5, -0.5}), 10000, 32, 4);
    CHECK(drift.fraction_final_positive == 1.0);
    CHECK(drift.mean > 0.0);
}
