#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace cocyclab;

TEST_CASE("counter-based draws are pure functions of key and counter")
{
    CHECK(uniform_at(7, 3) == uniform_at(7, 3));
    CHECK(uniform_at(7, 3) != uniform_at(7, 4));
    CHECK(uniform_at(7, 3) != uniform_at(8, 3));

    CounterStream a(derive_seed(1, 2));
    CounterStream b(derive_seed(1, 2));
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("derived streams are distinct")
{
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 64; ++s) {
        seeds.push_back(derive_seed(42, s));
    }
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
}

TEST_CASE("uniform draws have mean 1/2 and variance 1/12")
{
    CounterStream rng(99);
    RunningStats st;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        st.add(rng.uniform());
    }
    CHECK(std::abs(st.mean() - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(st.variance() == doctest::Approx(1.0 / 12.0).epsilon(0.01));
}

TEST_CASE("RunningStats agrees with the two-pass formula and merges associatively")
{
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(3.0, 2.0);
    std::vector<double> xs(1000);
    for (auto& x : xs) {
        x = nd(gen);
    }
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    RunningStats all, left, right;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        all.add(xs[i]);
        (i < 377 ? left : right).add(xs[i]);
    }
    left.merge(right);
    CHECK(all.mean() == doctest::Approx(mean).epsilon(1e-13));
    CHECK(all.variance() == doctest::Approx(ss / (xs.size() - 1)).epsilon(1e-12));
    CHECK(left.mean() == doctest::Approx(all.mean()).epsilon(1e-13));
    CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    CHECK(left.count() == all.count());
}

TEST_CASE("compensated sum recovers cancelled low-order terms")
{
    CompensatedSum s;
    s.add(1e16);
    for (int i = 0; i < 1000; ++i) {
        s.add(1.0);
    }
    s.add(-1e16);
    CHECK(s.value() == 1000.0);
}

TEST_CASE("quantile interpolates linearly")
{
    CHECK(quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.5);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.95) == doctest::Approx(4.8));
    CHECK(median({5.0}) == 5.0);
    CHECK(std::isnan(median({})));
}

TEST_CASE("z_score reads 0/0 as agreement")
{
    CHECK(z_score(1.0, 1.0, 0.0) == 0.0);
    CHECK(std::isinf(z_score(1.0, 2.0, 0.0)));
    CHECK(z_score(3.0, 1.0, 0.5) == 4.0);
}

TEST_CASE("parallel_map results do not depend on the worker count")
{
    auto run = [](int jobs) {
        set_default_jobs(jobs);
        return parallel_map<double>(257, [](std::size_t i) {
            CounterStream r(derive_seed(3, i));
            double s = 0.0;
            for (int k = 0; k < 100; ++k) {
                s += r.uniform();
            }
            return s;
        });
    };
    const auto one = run(1);
    const auto four = run(4);
    set_default_jobs(0);
    CHECK(one == four);
}

TEST_CASE("parallel_for rethrows the lowest-index failure")
{
    set_default_jobs(3);
    try {
        parallel_for(50, [](std::size_t i) {
            if (i == 17 || i == 40) {
                throw std::runtime_error(std::to_string(i));
            }
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "17");
    }
    set_default_jobs(0);
}
