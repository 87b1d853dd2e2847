#pragma once

#include <cstdint>
#include <limits>

namespace cocyclab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent sub-seed for ensemble member / purpose `stream`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Counter-based uniform draw in [0, 1), a pure function of (key, counter).
constexpr double uniform_at(std::uint64_t key, std::int64_t counter)
{
    const std::uint64_t bits = mix64(key ^ mix64(static_cast<std::uint64_t>(counter)));
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential stream over the counter-based generator. Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterStream {
public:
    using result_type = std::uint64_t;

    explicit CounterStream(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ ^ mix64(counter_++)); }

    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace cocyclab
