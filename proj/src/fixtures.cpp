#include "cocyclab/fixtures.hpp"

#include "cocyclab/errors.hpp"

#include <cmath>

namespace cocyclab {

namespace {

using nlohmann::json;

json bernoulli(std::vector<std::string> alphabet, std::vector<double> probs, std::uint64_t seed)
{
    return {{"kind", "bernoulli"}, {"alphabet", alphabet}, {"probs", probs}, {"seed", seed}};
}

json diag_pm_one()
{
    const double e = std::exp(1.0);
    return {{"d", 2},
            {"window", {1, 1}},
            {"table", {{"u", {{e, 0.0}, {0.0, 1.0 / e}}}, {"v", {{1.0 / e, 0.0}, {0.0, e}}}}}};
}

json rotation(double theta)
{
    return {{std::cos(theta), -std::sin(theta)}, {std::sin(theta), std::cos(theta)}};
}

json sl3_system(std::uint64_t seed)
{
    return bernoulli({"a", "A", "b", "B", "c", "C"}, std::vector<double>(6, 1.0 / 6.0), seed);
}

json sl3_cocycle()
{
    return {{"d", 3},
            {"window", {1, 1}},
            {"table",
             {{"a", {{1, 1, 0}, {1, 2, 1}, {0, 1, 2}}},
              {"A", {{3, -2, 1}, {-2, 2, -1}, {1, -1, 1}}},
              {"b", {{2, 0, 1}, {1, 1, 1}, {1, 0, 1}}},
              {"B", {{1, 0, -1}, {0, 1, -1}, {-1, 0, 2}}},
              {"c", {{1, 0, 0}, {3, 1, 0}, {2, 1, 1}}},
              {"C", {{1, 0, 0}, {-3, 1, 0}, {1, -1, 1}}}}}};
}

json spectrum_params(long n, long ensemble)
{
    return {{"n", n}, {"ensemble", ensemble}};
}

std::vector<Fixture> build()
{
    std::vector<Fixture> out;

    out.push_back({"diag-const", "spectrum", "lambda = (ln 2, -ln 2) = (0.693147..., -0.693147...), simple",
                   "closed form: constant diagonal product",
                   {{"experiment", "spectrum"},
                    {"system", bernoulli({"a"}, {1.0}, 1)},
                    {"cocycle", {{"d", 2}, {"table", {{"a", {{2.0, 0.0}, {0.0, 0.5}}}}}}},
                    {"params", spectrum_params(1000, 4)}}});

    out.push_back({"diag-p075", "spectrum", "lambda_1 = 0.5, simple",
                   "drift 0.75 - 0.25 of the diagonal log-walk",
                   {{"experiment", "spectrum"},
                    {"system", bernoulli({"u", "v"}, {0.75, 0.25}, 2)},
                    {"cocycle", diag_pm_one()},
                    {"params", spectrum_params(100000, 32)}}});

    out.push_back({"diag-p050", "spectrum", "lambda_1 = 0, degenerate",
                   "zero drift of the symmetric diagonal log-walk (amenable hull)",
                   {{"experiment", "spectrum"},
                    {"system", bernoulli({"u", "v"}, {0.5, 0.5}, 3)},
                    {"cocycle", diag_pm_one()},
                    {"params", spectrum_params(100000, 32)}}});

    out.push_back({"rotation", "spectrum", "lambda = (0, 0), degenerate",
                   "isometric cocycle (rotations preserve norms)",
                   {{"experiment", "spectrum"},
                    {"system", bernoulli({"r", "s"}, {0.5, 0.5}, 4)},
                    {"cocycle", {{"d", 2}, {"table", {{"r", rotation(1.0)}, {"s", rotation(-1.0)}}}}},
                    {"params", spectrum_params(10000, 8)}}});

    out.push_back({"sl2z-uniform-walk", "spectrum", "lambda_1 > 0 (> 5 sigma), simple; QR = norm growth",
                   "positivity and simplicity for a Zariski-dense walk; independent norm-growth estimator",
                   {{"experiment", "spectrum"},
                    {"system", sl2z_system(5)},
                    {"cocycle", sl2z_cocycle()},
                    {"params", spectrum_params(100000, 32)}}});

    out.push_back({"sl3-generic", "spectrum", "lambda_1 > lambda_2 > lambda_3 (gaps > 3 sigma), sum = 0",
                   "simplicity for a Zariski-dense walk; trace of SL_3 is zero",
                   {{"experiment", "spectrum"},
                    {"system", sl3_system(6)},
                    {"cocycle", sl3_cocycle()},
                    {"params", spectrum_params(50000, 32)}}});

    out.push_back({"sl2z-induced", "induce", "lambda*_1 / lambda_1 = 1 / m(x_0 = A) = 4 (within 5%); Kac product 1",
                   "Kakutani rescaling and the Kac identity, m(x_0 = A) = 1/4 exactly",
                   {{"experiment", "induce"},
                    {"system", sl2z_system(7)},
                    {"cocycle", sl2z_cocycle()},
                    {"params", {{"indicator", {{"0", "A"}}}, {"n", 25000}, {"ensemble", 32},
                                {"mass_ensemble", 100000}}}}});

    out.push_back({"sl2z-flags", "flags", "median equivariance sine < 1e-3, transverse >= 99%; frame defect < 1e-3",
                   "equivariance of the finite-horizon Oseledets splitting",
                   {{"experiment", "flags"},
                    {"system", sl2z_system(8)},
                    {"cocycle", sl2z_cocycle()},
                    {"params", {{"n", 400}, {"ensemble", 200}, {"orbit_length", 2000}, {"frame_ensemble", 16}}}}});

    out.push_back({"sl2z-stationary", "stationary",
                   "refresh max z < 3; Furstenberg lambda_1 = QR lambda_1; proper; contraction diameter < 0.01",
                   "stationarity mu * nu = nu; Furstenberg formula; harmonic family properties",
                   {{"experiment", "stationary"},
                    {"system", sl2z_system(9)},
                    {"cocycle", sl2z_cocycle()},
                    {"params",
                     {{"burn", 200},
                      {"samples", 2000},
                      {"spectrum", {{"n", 20000}, {"ensemble", 32}}},
                      {"properness",
                       {{"eps", {0.4, 0.3, 0.2, 0.15, 0.1}},
                        {"subspaces", {{{1.0, 0.0}}, {{0.0, 1.0}}, {{1.0, 1.0}}, {{2.0, -1.0}}}}}},
                      {"contraction", {{"n", {25, 50, 100, 200}}, {"points", 40}}},
                      {"harmonic", {{"M", 200}, {"n", 200}}},
                      {"growth", {{"n", 400}, {"ensemble", 64}}}}}}});

    out.push_back({"reducible-upper", "stationary", "not proper: mass of the e_1 locus >= 0.5 at every eps",
                   "common invariant line e_1 (upper-triangular generators)",
                   {{"experiment", "stationary"},
                    {"system", bernoulli({"p", "q"}, {0.5, 0.5}, 10)},
                    {"cocycle",
                     {{"d", 2},
                      {"table", {{"p", {{2.0, 1.0}, {0.0, 0.5}}}, {"q", {{0.5, 1.0}, {0.0, 2.0}}}}}}},
                    {"params",
                     {{"burn", 200},
                      {"samples", 1000},
                      {"properness",
                       {{"eps", {0.2, 0.1, 0.05, 0.025}}, {"subspaces", {{{1.0, 0.0}}, {{0.0, 1.0}}}}}}}}}});

    const json f2_uniform = {{"k", 2}, {"mu", "uniform"}, {"n", 250}, {"count", 2000}, {"seed", 11}};

    out.push_back({"f2-harmonic", "boundary", "nu(a) = 1/4, nu(ab) = 1/12",
                   "exact harmonic measure of the simple random walk on F_2",
                   {{"experiment", "boundary"},
                    {"ensemble", {{"k", 2}, {"mu", "uniform"}, {"n", 250}, {"count", 4000}, {"seed", 12}}},
                    {"params", {{"cylinders", {"a", "ab", "A", "ba"}}}}}});

    out.push_back({"f2-martingale", "boundary", "fraction >= 0.95 at n = 200 for D = cylinder(a)",
                   "martingale convergence h_D(check-pi_n) -> 1_D with exact h_D",
                   {{"experiment", "boundary"},
                    {"ensemble", f2_uniform},
                    {"params",
                     {{"martingale", {{"D", "a"}, {"eps", 0.05}, {"grid", {10, 25, 50, 100, 150, 200}}}}}}}});

    out.push_back({"f2-skew-boundary", "boundary", "max cylinder discrepancy < 4 sigma",
                   "invariance of mu^N x nu under the boundary skew product",
                   {{"experiment", "boundary"},
                    {"ensemble", {{"k", 2}, {"mu", "uniform"}, {"n", 200}, {"count", 10000}, {"seed", 13}}},
                    {"params", {{"skew", {{"shift", 1}, {"max_len", 2}}}}}}});

    json perms = {{"a", {1, 2, 0}}, {"A", {2, 0, 1}}, {"b", {2, 0, 1}}, {"B", {1, 2, 0}}};
    json observables = json::array();
    for (const char* s : {"a", "b"}) {
        for (int z = 0; z < 3; ++z) {
            observables.push_back({{"x", {{"1", s}}}, {"z", z}});
        }
    }
    out.push_back({"f2-perm-skew", "skew", "Birkhoff averages = m x zeta = 1/12 for all 6 cylinders (within 3 sigma)",
                   "ergodicity of the skew product over a transitive action",
                   {{"experiment", "skew"},
                    {"system", bernoulli({"a", "A", "b", "B"}, {0.25, 0.25, 0.25, 0.25}, 14)},
                    {"skew", {{"z_size", 3}, {"perms", perms}}},
                    {"params", {{"n", 100000}, {"ensemble", 32}, {"observables", observables}}}}});

    return out;
}

} // namespace

nlohmann::json sl2z_system(std::uint64_t seed)
{
    return bernoulli({"A", "Ai", "B", "Bi"}, {0.25, 0.25, 0.25, 0.25}, seed);
}

nlohmann::json sl2z_cocycle()
{
    return {{"d", 2},
            {"window", {1, 1}},
            {"table",
             {{"A", {{1, 2}, {0, 1}}},
              {"Ai", {{1, -2}, {0, 1}}},
              {"B", {{1, 0}, {2, 1}}},
              {"Bi", {{1, 0}, {-2, 1}}}}}};
}

const std::vector<Fixture>& fixtures()
{
    static const std::vector<Fixture> all = build();
    return all;
}

const Fixture& fixture(const std::string& name)
{
    for (const auto& f : fixtures()) {
        if (f.name == name) {
            return f;
        }
    }
    throw ValidationError("unknown fixture '" + name + "'");
}

} // namespace cocyclab
