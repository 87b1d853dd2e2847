#include "cocyclab/cocycle.hpp"
#include "cocyclab/errors.hpp"
#include "cocyclab/fixtures.hpp"
#include "cocyclab/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace cocyclab;

namespace {

Matrix m2(double a, double b, double c, double d)
{
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

struct Sl2z {
    SymbolicSystem system = SymbolicSystem::from_json(sl2z_system(1));
    CocycleSpec cocycle = CocycleSpec::from_json(sl2z_cocycle(), system);
};

} // namespace

TEST_CASE("F_n(x) is the left-to-right product of generators along the orbit")
{
    Sl2z s;
    OrbitWindow x(s.system, 3);
    x.extend(-20, 20);
    Matrix expected = Matrix::Identity(2, 2);
    for (long k = 0; k < 5; ++k) {
        // Window [1, 1]: F(T^k x) = table[x_{k+1}].
        const std::string name = s.system.name(x.at(k + 1));
        const Matrix g = name == "A" ? m2(1, 2, 0, 1)
                         : name == "Ai" ? m2(1, -2, 0, 1)
                         : name == "B" ? m2(1, 0, 2, 1)
                                       : m2(1, 0, -2, 1);
        expected = g * expected;
    }
    CHECK(evaluate_naive(s.cocycle, x, 5) == expected);
    CHECK(evaluate(s.cocycle, x, 5).value() == expected);
}

TEST_CASE("cocycle identity F_{k+n}(x) = F_k(T^n x) F_n(x) for all signs")
{
    Sl2z s;
    OrbitWindow x(s.system, 5);
    x.extend(-40, 40);
    for (long k = -12; k <= 12; k += 3) {
        for (long n = -12; n <= 12; n += 2) {
            const Matrix lhs = evaluate_naive(s.cocycle, x, k + n);
            const Matrix rhs = evaluate_naive(s.cocycle, x.shifted(n), k) * evaluate_naive(s.cocycle, x, n);
            CHECK(relative_frobenius(lhs, rhs) < 1e-12);
        }
    }
}

TEST_CASE("F_0 is the identity and F_{-n}(x) inverts F_n(T^{-n} x)")
{
    Sl2z s;
    OrbitWindow x(s.system, 6);
    x.extend(-30, 30);
    CHECK(evaluate_naive(s.cocycle, x, 0) == Matrix::Identity(2, 2));
    for (long n = 1; n <= 10; ++n) {
        const Matrix back = evaluate_naive(s.cocycle, x, -n);
        const Matrix fwd = evaluate_naive(s.cocycle, x.shifted(-n), n);
        CHECK(relative_frobenius(back * fwd, Matrix::Identity(2, 2)) < 1e-12);
    }
}

TEST_CASE("rescaled products agree with naive products and survive overflow")
{
    Sl2z s;
    OrbitWindow x(s.system, 7);
    x.extend(-10, 3000);
    const Matrix naive = evaluate_naive(s.cocycle, x, 60);
    CHECK(relative_frobenius(evaluate(s.cocycle, x, 60).value(), naive) < 1e-12);

    const ScaledMatrix big = evaluate(s.cocycle, x, 3000);
    CHECK(big.m.allFinite());
    // log ||F_n|| must grow roughly linearly (lambda_1 ~ 0.32).
    const double rate = (std::log(operator_norm(big.m)) + big.exp2 * std::log(2.0)) / 3000.0;
    CHECK(rate > 0.2);
    CHECK(rate < 0.5);
}

TEST_CASE("graded product keeps log|det| = 0 where det() of the assembled product fails")
{
    Sl2z s;
    OrbitWindow x(s.system, 8);
    x.extend(-10, 5000);
    const GradedProduct g = evaluate_graded(s.cocycle, x, 5000);
    CHECK(std::abs(g.log_abs_det()) < 1e-9);
    const GradedProduct small = evaluate_graded(s.cocycle, x, 30);
    CHECK(relative_frobenius(small.assemble().value(), evaluate_naive(s.cocycle, x, 30)) < 1e-10);
    for (int i = 0; i < 2; ++i) {
        CHECK(g.unit_upper(i, i) == 1.0);
    }
}

TEST_CASE("windows wider than one coordinate index the table by joined names")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "b"}, {0.5, 0.5});
    std::map<std::string, Matrix> table = {{"a,a", m2(2, 0, 0, 0.5)},
                                           {"a,b", m2(1, 1, 0, 1)},
                                           {"b,a", m2(1, 0, 1, 1)},
                                           {"b,b", m2(0, -1, 1, 0)}};
    const auto c = CocycleSpec::from_table(sys, 0, 1, table);
    OrbitWindow x(sys, 2);
    x.extend(-5, 10);
    for (long k = 0; k < 8; ++k) {
        const std::string key = sys.name(x.at(k)) + "," + sys.name(x.at(k + 1));
        CHECK(c.generator(x, k) == table.at(key));
    }
    CHECK(c.coordinates_for(5) == std::make_pair(0L, 5L));
    CHECK(c.coordinates_for(-3) == std::make_pair(-3L, 0L));
    CHECK_FALSE(c.is_random_walk(sys));
}

TEST_CASE("evaluation outside the materialized window raises WindowTooSmall")
{
    Sl2z s;
    OrbitWindow x(s.system, 9);
    x.extend(0, 5);
    CHECK_THROWS_AS(evaluate(s.cocycle, x, 10), WindowTooSmall);
    // F_{-1}(x) = F(T^{-1} x)^{-1} reads x_0 only; F_{-2} also needs x_{-1}.
    CHECK_NOTHROW(evaluate(s.cocycle, x, -1));
    CHECK_THROWS_AS(evaluate(s.cocycle, x, -2), WindowTooSmall);
}

TEST_CASE("cocycle validation")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "b"}, {0.5, 0.5});
    CHECK_THROWS_AS(CocycleSpec::from_table(sys, 1, 1, {{"a", m2(2, 0, 0, 1)}, {"b", m2(1, 0, 0, 1)}}),
                    ValidationError);
    CHECK_THROWS_AS(CocycleSpec::from_table(sys, 1, 1, {{"a", m2(1, 0, 0, 1)}}), ValidationError);
    CHECK_THROWS_AS(
        CocycleSpec::from_table(sys, 1, 1, {{"a", m2(1, 0, 0, 1)}, {"b", m2(1, 0, 0, 1)}, {"c", m2(1, 0, 0, 1)}}),
        ValidationError);
    Matrix nan = m2(1, 0, 0, 1);
    nan(0, 1) = std::nan("");
    CHECK_THROWS_AS(validate_sl(nan, "x"), ValidationError);
    CHECK_THROWS_AS(CocycleSpec::from_json(nlohmann::json::parse(R"({"d": 3, "table": {"a": [[1,0],[0,1]],
                                                                     "b": [[1,0],[0,1]]}})"),
                                           sys),
                    ValidationError);
    CHECK_THROWS_AS(CocycleSpec::from_json(nlohmann::json::parse(R"({"table": {"a": [[1,0],[0]],
                                                                     "b": [[1,0],[0,1]]}})"),
                                           sys),
                    ValidationError);
}

TEST_CASE("zero-probability symbols need no table entry")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "b"}, {1.0, 0.0});
    const auto c = CocycleSpec::from_table(sys, 1, 1, {{"a", m2(2, 0, 0, 0.5)}});
    CHECK(c.by_code(1) == Matrix::Identity(2, 2));
}

TEST_CASE("cocycle JSON round trip")
{
    Sl2z s;
    const auto j = s.cocycle.to_json(s.system);
    const auto back = CocycleSpec::from_json(j, s.system);
    for (std::size_t c = 0; c < s.cocycle.table_size(); ++c) {
        CHECK(back.by_code(c) == s.cocycle.by_code(c));
    }
}

TEST_CASE("integrability estimate equals the exact mean of log operator norms")
{
    Sl2z s;
    // ||[[1, 2], [0, 1]]|| = 1 + sqrt(2) for all four generators.
    const auto est = integrability(s.cocycle, s.system, 200, 1);
    CHECK(est.estimate == doctest::Approx(std::log(1.0 + std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("skew system: permutations, zeta invariance and the z-transition")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "A", "b", "B"}, {0.25, 0.25, 0.25, 0.25});
    const auto skew = SkewSystem::from_json(
        nlohmann::json::parse(R"({"z_size": 3, "perms": {"a": [1,2,0], "A": [2,0,1], "b": [2,0,1], "B": [1,2,0]}})"),
        sys);
    const Matrix p = skew.z_transition();
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK((p.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
    OrbitWindow x(sys, 4);
    const auto traj = skew_orbit(skew, x, 0, 50);
    for (long k = 0; k < 50; ++k) {
        CHECK(traj[static_cast<std::size_t>(k + 1)] == skew.perm(x.at(k + 1))[static_cast<std::size_t>(traj[k])]);
    }

    CHECK_THROWS_AS(SkewSystem::from_json(nlohmann::json::parse(
                                              R"({"z_size": 3, "perms": {"a": [1,1,0], "A": [2,0,1], "b": [2,0,1], "B": [1,2,0]}})"),
                                          sys),
                    ValidationError);
    CHECK_THROWS_AS(
        SkewSystem::from_json(
            nlohmann::json::parse(
                R"({"z_size": 3, "zeta": [0.5, 0.25, 0.25], "perms": {"a": [1,2,0], "A": [2,0,1], "b": [2,0,1], "B": [1,2,0]}})"),
            sys),
        ValidationError);
}

TEST_CASE("skew ergodicity: transitive action passes, a fixed point is detected")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "A", "b", "B"}, {0.25, 0.25, 0.25, 0.25});
    std::vector<SkewObservable> obs;
    for (int z = 0; z < 3; ++z) {
        obs.push_back({{{1, 0}}, z, "a" + std::to_string(z)});
    }
    const auto transitive = SkewSystem::from_json(
        nlohmann::json::parse(R"({"z_size": 3, "perms": {"a": [1,2,0], "A": [2,0,1], "b": [2,0,1], "B": [1,2,0]}})"),
        sys);
    const auto ok = skew_ergodicity_test(transitive, obs, 20000, 16, 1);
    CHECK(ok.max_z < 4.0);
    for (const auto& o : ok.observables) {
        CHECK(o.space_average == doctest::Approx(0.25 / 3.0));
    }
    // z = 2 is fixed by every generator, so X x {0, 1} is invariant.
    const auto split = SkewSystem::from_json(
        nlohmann::json::parse(R"({"z_size": 3, "perms": {"a": [1,0,2], "A": [1,0,2], "b": [0,1,2], "B": [0,1,2]}})"),
        sys);
    const auto bad = skew_ergodicity_test(split, obs, 20000, 16, 1);
    CHECK(bad.max_z > 10.0);
}

TEST_CASE("skew rho cocycle is validated as SL_d per state")
{
    const auto sys = SymbolicSystem::bernoulli({"a", "b"}, {0.5, 0.5});
    CHECK_NOTHROW(SkewSystem::from_json(
        nlohmann::json::parse(
            R"({"z_size": 2, "perms": {"a": [1,0], "b": [0,1]}, "rho": {"a": [[[2,0],[0,0.5]], [[1,0],[0,1]]], "b": [[[1,1],[0,1]], [[1,0],[1,1]]]}})"),
        sys));
    CHECK_THROWS_AS(SkewSystem::from_json(
                        nlohmann::json::parse(
                            R"({"z_size": 2, "perms": {"a": [1,0], "b": [0,1]}, "rho": {"a": [[[2,0],[0,1]], [[1,0],[0,1]]], "b": [[[1,1],[0,1]], [[1,0],[1,1]]]}})"),
                        sys),
                    ValidationError);
}
