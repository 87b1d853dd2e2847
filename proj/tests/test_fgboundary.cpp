#include "cocyclab/errors.hpp"
#include "cocyclab/fgboundary.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cocyclab;

namespace {

ReducedWord w(const std::string& s) { return ReducedWord::parse(s); }

PathEnsemble ensemble(const std::string& text) { return PathEnsemble::from_json(nlohmann::json::parse(text)); }

// E|pi_n| for the uniform walk on F_k from the birth-death chain of lengths:
// 0 -> 1 surely, l -> l + 1 with probability (2k - 1) / 2k otherwise.
double exact_mean_length(int k, long n)
{
    const double up = (2.0 * k - 1.0) / (2.0 * k);
    std::vector<double> p(static_cast<std::size_t>(n + 2), 0.0);
    p[0] = 1.0;
    for (long m = 0; m < n; ++m) {
        std::vector<double> q(p.size(), 0.0);
        q[1] += p[0];
        for (std::size_t l = 1; l + 1 < p.size(); ++l) {
            q[l + 1] += up * p[l];
            q[l - 1] += (1.0 - up) * p[l];
        }
        p.swap(q);
    }
    double mean = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) {
        mean += static_cast<double>(l) * p[l];
    }
    return mean;
}

} // namespace

TEST_CASE("reduced words: free reduction, inverses and products")
{
    CHECK(w("aA").empty());
    CHECK(w("e").empty());
    CHECK(w("abBc").str() == "ac");
    CHECK(w("abC").inverse() == w("cBA"));
    CHECK((w("ab") * w("Bc")) == w("ac"));
    CHECK((w("ab") * w("ab").inverse()).empty());
    CHECK(w("abc").has_prefix(w("ab")));
    CHECK_FALSE(w("abc").has_prefix(w("b")));
    CHECK(w("abc").prefix(2) == w("ab"));
    CHECK_THROWS_AS(w("a1"), ValidationError);
}

TEST_CASE("tree distance is the length of g^-1 h")
{
    CHECK(tree_distance(w("ab"), w("ab")) == 0);
    CHECK(tree_distance(w("ab"), w("aB")) == 2);
    CHECK(tree_distance(w("ab"), w("c")) == 3);
    CHECK(tree_distance(w(""), w("abc")) == 3);
    // Triangle inequality on a few triples.
    const std::vector<ReducedWord> ws = {w("ab"), w("Ba"), w("abab"), w("c"), w("")};
    for (const auto& x : ws) {
        for (const auto& y : ws) {
            for (const auto& z : ws) {
                CHECK(tree_distance(x, z) <= tree_distance(x, y) + tree_distance(y, z));
            }
        }
    }
}

TEST_CASE("step laws are validated")
{
    CHECK(StepLaw::uniform(2).is_uniform());
    CHECK_THROWS_AS(StepLaw(2, {0.5, 0.5, 0.0}), ValidationError);
    CHECK_THROWS_AS(StepLaw(2, {0.5, 0.5, 0.1, -0.1}), ValidationError);
    CHECK_THROWS_AS(StepLaw(2, {0.5, 0.5, 0.5, 0.5}), ValidationError);
    // b and B without mass: the support does not generate F_2.
    CHECK_THROWS_AS(StepLaw(2, {0.5, 0.5, 0.0, 0.0}), ValidationError);
    const StepLaw m = StepLaw::from_json(nlohmann::json::parse(R"({"a": 0.4, "A": 0.1, "b": 0.25, "B": 0.25})"), 2);
    CHECK(m.prob(letter_from_name('a')) == 0.4);
    CHECK(m.prob(letter_from_name('A')) == 0.1);
    CHECK_THROWS_AS(StepLaw::from_json(nlohmann::json::parse(R"({"c": 1.0})"), 2), ValidationError);
    CHECK_THROWS_AS(StepLaw::from_json(nlohmann::json::parse(R"("gauss")"), 2), ValidationError);
}

TEST_CASE("walks are pure functions of seed and index, and pi_check inverts each step")
{
    const StepLaw mu = StepLaw::uniform(2);
    const WalkPath a = walk_path(mu, 100, 7, 3);
    const WalkPath b = walk_path(mu, 100, 7, 3);
    CHECK(a.steps == b.steps);
    const WalkPath replay = walk_from_steps(a.steps);
    CHECK(replay.pi == a.pi);
    std::vector<Letter> inverted;
    for (Letter l : a.steps) {
        inverted.push_back(-l);
    }
    CHECK(a.pi_check == walk_from_steps(inverted).pi);
    CHECK(a.pi_lengths.size() == 101);
}

TEST_CASE("mean word length matches the birth-death oracle")
{
    const auto e = ensemble(R"({"k": 2, "mu": "uniform", "n": 200, "count": 4000, "seed": 1})");
    const auto paths = walk_paths(e);
    double sum = 0.0, sq = 0.0;
    for (const auto& p : paths) {
        const auto l = static_cast<double>(p.pi_lengths.back());
        sum += l;
        sq += l * l;
    }
    const double mean = sum / paths.size();
    const double se = std::sqrt((sq / paths.size() - mean * mean) / (paths.size() - 1));
    CHECK(std::abs(mean - exact_mean_length(2, 200)) < 4.0 * se);
    // Drift 1 - 2 / 2k = 1/2 per step.
    CHECK(exact_mean_length(2, 200) == doctest::Approx(100.75).epsilon(1e-3));
}

TEST_CASE("boundary points are the stable prefixes of the word")
{
    const WalkPath p = walk_from_steps({1, 2, 2, 1, -1, -2, 2});
    // pi_m runs a, ab, abb, abba, abb, ab, abb; over the last three steps only ab survives.
    CHECK(p.pi == w("abb"));
    const auto b = boundary_point(p, 3);
    REQUIRE(b);
    CHECK(*b == w("ab"));
    CHECK_FALSE(boundary_point(walk_from_steps({1, -1}), 1));
}

TEST_CASE("harmonic measure of a cylinder of length m is 1/(2k) (2k-1)^-(m-1)")
{
    const auto e = ensemble(R"({"k": 2, "mu": "uniform", "n": 250, "count": 8000, "seed": 12})");
    const auto r = harmonic_measure(e, {w("a"), w("ab"), w("B"), w("ba")});
    CHECK(r.resolved_fraction > 0.99);
    const std::vector<double> exact = {0.25, 0.25 / 3, 0.25, 0.25 / 3};
    for (std::size_t i = 0; i < exact.size(); ++i) {
        CHECK(std::abs(r.cylinders[i].estimate - exact[i]) < 4.0 * r.cylinders[i].stderr_);
    }
}

TEST_CASE("exact h_D is mu-harmonic with the right limits")
{
    const StepLaw mu = StepLaw::uniform(2);
    const HarmonicFunction h(mu, {w("a"), false});
    const HarmonicFunction hc(mu, {w("a"), true});
    CHECK(h.exact());
    CHECK(h(w("")) == doctest::Approx(0.25).epsilon(1e-12));
    for (const auto& g : {w(""), w("a"), w("A"), w("ab"), w("bA"), w("aab"), w("Ba")}) {
        double avg = 0.0;
        for (Letter l : {1, -1, 2, -2}) {
            ReducedWord gl = g;
            gl.append(l);
            avg += 0.25 * h(gl);
        }
        CHECK(avg == doctest::Approx(h(g)).epsilon(1e-12));
        CHECK(hc(g) == doctest::Approx(1.0 - h(g)).epsilon(1e-12));
    }
    CHECK(h(w("aaaaaaaaaa")) > 1.0 - 1e-4);
    CHECK(h(w("bbbbbbbbbb")) < 1e-4);
}

TEST_CASE("Monte Carlo h_D for a non-uniform law agrees with the harmonic measure")
{
    const StepLaw mu(2, {0.4, 0.1, 0.25, 0.25});
    HarmonicMonteCarlo mc;
    mc.inner_samples = 4000;
    const HarmonicFunction h(mu, {w("a"), false}, mc);
    CHECK_FALSE(h.exact());
    PathEnsemble e{mu, 250, 20000, 3};
    const auto r = harmonic_measure(e, {w("a")});
    const double se_mc = std::sqrt(0.25 / mc.inner_samples);
    CHECK(std::abs(h(w("")) - r.cylinders[0].estimate) < 4.0 * std::hypot(se_mc, r.cylinders[0].stderr_));
}

TEST_CASE("h_D along check-pi_n converges to the indicator of the boundary point")
{
    const auto e = ensemble(R"({"k": 2, "mu": "uniform", "n": 250, "count": 1000, "seed": 11})");
    const MartingaleCurve c = martingale_check(e, {w("a"), false}, 0.05, {10, 50, 200});
    CHECK(c.exact_h);
    REQUIRE(c.points.size() == 3);
    CHECK(c.points.front().fraction < c.points.back().fraction);
    CHECK(c.points.back().fraction > 0.95);
    std::ostringstream out;
    write_martingale_csv(out, c);
    CHECK(out.str().rfind("n,fraction,stderr\n", 0) == 0);
    CHECK_THROWS_AS(martingale_check(e, {w("a"), false}, 0.7, {10}), ValidationError);
}

TEST_CASE("the boundary skew product preserves the product measure")
{
    const auto e = ensemble(R"({"k": 2, "mu": "uniform", "n": 200, "count": 10000, "seed": 13})");
    const SkewInvarianceReport r = boundary_skew_invariance(e, 1, 2);
    CHECK(r.max_z < 4.5);
    CHECK(r.skipped < r.samples / 100);
}

TEST_CASE("a walk concentrated on one generator shifts the boundary deterministically")
{
    // F_1 = Z with mu = delta_a: xi = a^infinity and omega_1 . xi = xi.
    const auto e = ensemble(R"({"k": 1, "mu": {"a": 1.0, "A": 0.0}, "n": 60, "count": 50, "seed": 1})");
    const SkewInvarianceReport r = boundary_skew_invariance(e, 1, 2);
    CHECK(r.skipped == 0);
    CHECK(r.max_z == 0.0);
    for (const auto& cell : r.cells) {
        CHECK(cell.before == cell.after);
        CHECK((cell.before == 0.0 || cell.before == 1.0));
    }
}
