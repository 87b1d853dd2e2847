#pragma once

// Samplable invertible ergodic shifts over a finite alphabet, lazily
// materialized two-sided orbit windows, Birkhoff averages and first-return
// (induced) systems.

#include "cocyclab/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cocyclab {

using json = nlohmann::json;
using Symbol = int;

class SymbolicSystem {
public:
    enum class Kind { bernoulli, markov };

    static SymbolicSystem bernoulli(std::vector<std::string> alphabet, std::vector<double> probs,
                                    std::uint64_t seed = 0);

    /// Stationary Markov shift. When `stationary` is omitted it is solved
    /// for and must be unique.
    static SymbolicSystem markov(std::vector<std::string> alphabet, Matrix transition,
                                 std::optional<std::vector<double>> stationary = std::nullopt,
                                 std::uint64_t seed = 0);

    /// {"kind": "bernoulli"|"markov", "alphabet": [...], "probs": [...] or
    ///  "transition": [[...]], optional "stationary": [...], "seed": n}
    static SymbolicSystem from_json(const json& j);
    json to_json() const;

    Kind kind() const { return kind_; }
    int size() const { return static_cast<int>(alphabet_.size()); }
    const std::vector<std::string>& alphabet() const { return alphabet_; }
    const std::string& name(Symbol s) const { return alphabet_.at(static_cast<std::size_t>(s)); }
    Symbol symbol(const std::string& name) const;
    std::uint64_t seed() const { return seed_; }

    /// One-dimensional marginal (probs for Bernoulli, stationary vector for Markov).
    const std::vector<double>& marginal() const { return marginal_; }
    const Matrix& transition() const { return transition_; }

    bool is_iid() const { return kind_ == Kind::bernoulli; }

    Symbol draw_marginal(double u) const;
    Symbol draw_next(Symbol prev, double u) const;
    /// Draws x_{i-1} given x_i from the time-reversed chain.
    Symbol draw_prev(Symbol next, double u) const;

    /// Exact measure of the cylinder {x : x_i = s for (i, s) in constraints}.
    double cylinder_measure(const std::vector<std::pair<long, Symbol>>& constraints) const;

    /// Whether a contiguous word has positive probability.
    bool word_possible(const std::vector<Symbol>& word) const;

private:
    SymbolicSystem() = default;
    void validate() const;

    Kind kind_ = Kind::bernoulli;
    std::vector<std::string> alphabet_;
    std::vector<double> marginal_;
    Matrix transition_;
    Matrix reversed_;
    std::uint64_t seed_ = 0;
};

/// A point x of the shift space, materialized lazily on a contiguous index
/// range. Symbols are pure functions of (seed, raw index) for Bernoulli
/// shifts and of the neighbouring symbol towards the anchor for Markov
/// shifts, so extending never changes symbols already materialized.
class OrbitWindow {
public:
    OrbitWindow(const SymbolicSystem& system, std::uint64_t seed);

    /// Forward orbit of a Markov chain started at `origin` at index 0.
    static OrbitWindow pinned(const SymbolicSystem& system, std::uint64_t seed, Symbol origin);

    long i_min() const { return anchor_ - static_cast<long>(bwd_.size()) - offset_; }
    long i_max() const { return anchor_ + static_cast<long>(fwd_.size()) - 1 - offset_; }
    bool covers(long lo, long hi) const { return lo >= i_min() && hi <= i_max(); }

    /// x_i; throws WindowTooSmall outside the materialized range.
    Symbol at(long i) const
    {
        const long raw = i + offset_;
        if (raw >= anchor_) {
            const auto k = static_cast<std::size_t>(raw - anchor_);
            if (k < fwd_.size()) {
                return fwd_[k];
            }
        } else {
            const auto k = static_cast<std::size_t>(anchor_ - 1 - raw);
            if (k < bwd_.size()) {
                return bwd_[k];
            }
        }
        throw_out_of_window(i);
    }

    /// Materializes at least [lo, hi].
    void extend(long lo, long hi);

    /// T^n x, i.e. (T^n x)_i = x_{i+n}.
    OrbitWindow shifted(long n) const;

    /// Copy of this point with coordinates >= boundary kept and the past
    /// below `boundary` redrawn from the conditional law given the future.
    OrbitWindow with_resampled_past(long boundary, std::uint64_t past_seed) const;

    const SymbolicSystem& system() const { return *system_; }
    std::uint64_t seed() const { return seed_fwd_; }

private:
    [[noreturn]] void throw_out_of_window(long i) const;
    Symbol generate(long raw, Symbol neighbour) const;

    std::shared_ptr<const SymbolicSystem> system_;
    std::uint64_t seed_fwd_ = 0;
    std::uint64_t seed_bwd_ = 0;
    long anchor_ = 0;
    long offset_ = 0;
    std::vector<Symbol> fwd_; // raw anchor, anchor+1, ...
    std::vector<Symbol> bwd_; // raw anchor-1, anchor-2, ...
};

OrbitWindow sample_orbit(const SymbolicSystem& system, std::uint64_t seed, long i_min, long i_max);

/// Predicate on points of X depending on the coordinates [lo, hi] only.
class Indicator {
public:
    using Predicate = std::function<bool(const OrbitWindow&, long k)>;

    Indicator(long lo, long hi, Predicate pred, std::string name);

    static Indicator always();
    static Indicator cylinder(std::vector<std::pair<long, Symbol>> constraints);
    /// {"<index>": "<symbol>", ...}; the empty object is the full space.
    static Indicator from_json(const json& j, const SymbolicSystem& system);

    /// Evaluates at T^k x.
    bool operator()(const OrbitWindow& x, long k = 0) const { return pred_(x, k); }

    long lo() const { return lo_; }
    long hi() const { return hi_; }
    const std::string& name() const { return name_; }
    bool is_always() const { return always_; }
    /// Exact m(X*) when the indicator is a cylinder.
    std::optional<double> exact_measure(const SymbolicSystem& system) const;

private:
    long lo_;
    long hi_;
    Predicate pred_;
    std::string name_;
    bool always_ = false;
    std::optional<std::vector<std::pair<long, Symbol>>> cylinder_;
};

/// Bounded real function of the coordinates [lo, hi].
struct Observable {
    long lo = 0;
    long hi = 0;
    std::function<double(const OrbitWindow&, long k)> fn;

    static Observable constant(double c);
    /// Sum of weight * 1{x_index = symbol}.
    static Observable symbol_weights(long index, std::vector<double> weight_by_symbol);
};

inline constexpr long kDefaultReturnCap = 1'000'000;

/// Smallest n >= 1 with indicator(T^{start+n} x), extending x as needed.
/// Requires indicator(T^start x).
long first_return(const Indicator& indicator, OrbitWindow& x, long start = 0,
                  long return_cap = kDefaultReturnCap);

struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long count = 0;
};

class InducedSystem {
public:
    InducedSystem(SymbolicSystem base, Indicator indicator, long return_cap, MeanEstimate mass);

    const SymbolicSystem& base() const { return base_; }
    const Indicator& indicator() const { return indicator_; }
    long return_cap() const { return return_cap_; }
    double measured_mass() const { return mass_.mean; }
    double mass_stderr() const { return mass_.stderr_; }

    /// Point drawn from m* = m(.|X*) by rejection; candidate 0 is the plain
    /// window for `seed`, so T* = T reproduces base sampling exactly.
    OrbitWindow sample_point(std::uint64_t seed) const;

    /// First-return times along the T*-orbit of x (x must lie in X*).
    std::vector<long> return_times(OrbitWindow& x, long count) const;

    /// Ensemble mean of n(x) under m*.
    MeanEstimate mean_return(long ensemble, std::uint64_t seed) const;

private:
    SymbolicSystem base_;
    Indicator indicator_;
    long return_cap_;
    MeanEstimate mass_;
};

InducedSystem induce(const SymbolicSystem& system, const Indicator& indicator, long ensemble,
                     std::uint64_t seed, long return_cap = kDefaultReturnCap);

struct KacCheck {
    double product = 0.0; // measured_mass * mean return
    double sigma = 0.0;
    double z = 0.0;
};

KacCheck kac_check(const InducedSystem& induced, const MeanEstimate& returns);

struct BirkhoffStats {
    double mean = 0.0;
    double stderr_ = 0.0;
    /// Fraction of orbits whose partial sums dip below 0 at some k <= n.
    double fraction_dipped = 0.0;
    /// Fraction of orbits whose final partial sum is positive.
    double fraction_final_positive = 0.0;
    std::vector<double> member_means;
};

BirkhoffStats birkhoff(const SymbolicSystem& system, const Observable& h, long n, long ensemble,
                       std::uint64_t seed);

} // namespace cocyclab
