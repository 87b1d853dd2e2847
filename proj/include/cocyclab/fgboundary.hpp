#pragma once

// Random walks on free groups F_k, their boundary points and harmonic
// measure, martingale convergence of h_D along paths, and the boundary
// skew product S(omega, x) = (shifted omega, omega_1 . x).

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cocyclab {

/// Generator a_i is +(i+1), its inverse -(i+1).
using Letter = int;

std::string letter_name(Letter l);
Letter letter_from_name(char c);

class ReducedWord {
public:
    ReducedWord() = default;
    /// Freely reduces the sequence.
    static ReducedWord from_letters(const std::vector<Letter>& letters);
    /// Letters as characters: lowercase generators, uppercase inverses;
    /// "" or "e" is the identity.
    static ReducedWord parse(const std::string& s);

    const std::vector<Letter>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }

    /// Right multiplication by one letter with free cancellation.
    void append(Letter l);
    ReducedWord inverse() const;
    ReducedWord operator*(const ReducedWord& other) const;
    bool has_prefix(const ReducedWord& p) const;
    ReducedWord prefix(std::size_t len) const;
    std::string str() const;

    bool operator==(const ReducedWord& o) const { return letters_ == o.letters_; }

private:
    std::vector<Letter> letters_;
};

/// Distance in the Cayley tree.
std::size_t tree_distance(const ReducedWord& g, const ReducedWord& h);

/// Probability law on the 2k letters, slot 2i for a_i and 2i+1 for a_i^{-1}.
class StepLaw {
public:
    StepLaw(int k, std::vector<double> probs);
    static StepLaw uniform(int k);
    /// "uniform", an array of 2k probabilities, or {"a": p, "A": p, ...}.
    static StepLaw from_json(const nlohmann::json& j, int k);
    nlohmann::json to_json() const;

    int rank() const { return k_; }
    const std::vector<double>& probs() const { return probs_; }
    bool is_uniform() const;
    Letter draw(double u) const;
    double prob(Letter l) const;

private:
    int k_;
    std::vector<double> probs_;
};

struct PathEnsemble {
    StepLaw mu;
    long n = 0;
    long count = 0;
    std::uint64_t seed = 0;

    /// {"k": k, "mu": ..., "n": n, "count": c, "seed": s}.
    static PathEnsemble from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// One sample path: steps omega_1..omega_n with the final pi_n, check-pi_n
/// and their length histories (index m holds |pi_m|, m in [0, n]).
struct WalkPath {
    std::vector<Letter> steps;
    ReducedWord pi;
    ReducedWord pi_check;
    std::vector<std::size_t> pi_lengths;
    std::vector<std::size_t> check_lengths;
    /// check-pi_m at the requested snapshot times.
    std::vector<ReducedWord> check_snapshots;
};

/// Path `index` of the ensemble law (pure function of seed and index).
WalkPath walk_path(const StepLaw& mu, long n, std::uint64_t seed, long index,
                   const std::vector<long>& check_snapshot_times = {});

/// Walks from explicit steps (for deterministic paths).
WalkPath walk_from_steps(const std::vector<Letter>& steps);

std::vector<WalkPath> walk_paths(const PathEnsemble& e);

/// Longest prefix of the final word unchanged over the last s steps, or
/// nullopt when it is empty or n < s.
std::optional<ReducedWord> boundary_point(const ReducedWord& word, const std::vector<std::size_t>& lengths,
                                          long s);
std::optional<ReducedWord> boundary_point(const WalkPath& path, long s);
std::optional<ReducedWord> check_boundary_point(const WalkPath& path, long s);

inline constexpr long kDefaultStability = 50;

struct CylinderEstimate {
    ReducedWord prefix;
    double estimate = 0.0;
    double stderr_ = 0.0;
};

struct HarmonicMeasureReport {
    std::vector<CylinderEstimate> cylinders;
    double resolved_fraction = 0.0;
    long resolved = 0;
};

HarmonicMeasureReport harmonic_measure(const PathEnsemble& e, const std::vector<ReducedWord>& cylinders,
                                       long s = kDefaultStability);

/// Boundary cylinder D = {xi : xi starts with prefix}, or its complement.
struct BoundarySet {
    ReducedWord prefix;
    bool complement = false;

    bool contains(const ReducedWord& boundary_prefix) const;
};

/// Inner sample size and horizon of the nested Monte Carlo for h_D.
struct HarmonicMonteCarlo {
    long inner_samples = 200;
    long horizon = 100;
    long stability = 25;
    std::uint64_t seed = 0x68617276ULL;
};

/// h_D(g) = nu(g^{-1} D). Exact first-passage formula for uniform mu,
/// nested Monte Carlo otherwise.
class HarmonicFunction {
public:
    using MonteCarlo = HarmonicMonteCarlo;

    HarmonicFunction(StepLaw mu, BoundarySet d, MonteCarlo mc = {});

    bool exact() const { return exact_; }
    double operator()(const ReducedWord& g) const;

private:
    double cylinder_value(const ReducedWord& g) const;

    StepLaw mu_;
    BoundarySet d_;
    MonteCarlo mc_;
    bool exact_;
};

struct MartingalePoint {
    long n = 0;
    double fraction = 0.0;
    double stderr_ = 0.0;
};

struct MartingaleCurve {
    std::vector<MartingalePoint> points;
    long unresolved = 0;
    bool exact_h = false;
};

/// Fraction of paths with |h_D(check-pi_n) - 1_D(check-bnd)| < eps on the
/// grid; check-bnd is read at horizon max(grid) + s. Unresolved paths count
/// as failures.
MartingaleCurve martingale_check(const PathEnsemble& e, const BoundarySet& d, double eps,
                                 const std::vector<long>& grid, long s = kDefaultStability,
                                 HarmonicMonteCarlo mc = {});

struct SkewCell {
    std::vector<Letter> omega_prefix; // leading steps, not reduced
    ReducedWord x_prefix;
    double before = 0.0;
    double after = 0.0;
    double z = 0.0;
};

struct SkewInvarianceReport {
    std::vector<SkewCell> cells;
    double max_z = 0.0;
    long samples = 0;
    long skipped = 0;
};

/// Paired comparison of (omega-cylinder, x-cylinder) frequencies before and
/// after S^{n_shift}, over cylinders of length <= max_len (the pair of empty
/// cylinders is omitted). x is drawn from nu via an independent walk.
SkewInvarianceReport boundary_skew_invariance(const PathEnsemble& e, long n_shift, int max_len = 2,
                                              long s = kDefaultStability);

void write_martingale_csv(std::ostream& out, const MartingaleCurve& curve);

} // namespace cocyclab
