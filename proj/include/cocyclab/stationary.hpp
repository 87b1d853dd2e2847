#pragma once

// Stationary measures on the flag space, the harmonic family nu_-(x),
// Dirac contraction of backward products, properness profiles and the
// contraction-to-growth check.

#include "cocyclab/cocycle.hpp"
#include "cocyclab/dynamics.hpp"
#include "cocyclab/flagspace.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <iosfwd>
#include <vector>

namespace cocyclab {

struct Atom {
    Flag flag;
    double weight = 0.0;
};

/// Finite weighted point cloud on G/P. Bitwise-equal flags are merged.
class EmpiricalMeasure {
public:
    /// Equal weights 1/flags.size().
    explicit EmpiricalMeasure(const std::vector<Flag>& flags);
    /// Weights must be non-negative and sum to 1 within 1e-12.
    EmpiricalMeasure(std::vector<Atom> atoms, long sample_count);

    const std::vector<Atom>& atoms() const { return atoms_; }
    /// Number of samples the measure was built from (before merging).
    long sample_count() const { return sample_count_; }
    int dim() const { return atoms_.front().flag.dim(); }
    double max_weight() const;

    template <class Fn>
    double expectation(Fn&& f) const
    {
        double s = 0.0;
        for (const auto& a : atoms_) {
            s += a.weight * f(a.flag);
        }
        return s;
    }

    EmpiricalMeasure pushforward(const Matrix& g) const;

    nlohmann::json to_json() const;
    static EmpiricalMeasure from_json(const nlohmann::json& j);

private:
    void merge_equal();

    std::vector<Atom> atoms_;
    long sample_count_ = 0;
};

inline constexpr int kPanelSize = 8;

/// Fixed panel of Lipschitz test functions on G/P: |<E_1 line, w_k>| for
/// four directions w_k and |<normal of E_{d-1}, w_k>| for four more.
class TestPanel {
public:
    explicit TestPanel(int d);
    std::array<double, kPanelSize> operator()(const Flag& f) const;
    const std::vector<Vector>& directions() const { return directions_; }

private:
    std::vector<Vector> directions_;
};

struct PanelComparison {
    std::array<double, kPanelSize> left{};
    std::array<double, kPanelSize> right{};
    std::array<double, kPanelSize> sigma{};
    std::array<double, kPanelSize> z{};
    double max_z = 0.0;
};

/// Two-sample comparison of independent equal-weight samples.
PanelComparison compare_samples(const std::vector<Flag>& a, const std::vector<Flag>& b);

struct StationaryEstimate {
    EmpiricalMeasure measure;
    /// Paired comparison of each atom against its one-step refresh by the
    /// next generator on the same orbit.
    PanelComparison refresh;
    long burn = 0;
};

/// Atoms F_burn(x_k) applied to the standard flag over independent orbits.
StationaryEstimate estimate_stationary(const CocycleSpec& c, const SymbolicSystem& system, long burn, long samples,
                                       std::uint64_t seed);

struct FurstenbergEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
};

/// Sum over generators g of mu(g) log(||g v|| / ||v||), averaged over the
/// E_1 lines of nu. The generator sum is exact, so no seed is needed.
/// Requires an i.i.d. single-coordinate cocycle.
FurstenbergEstimate furstenberg_top_exponent(const CocycleSpec& c, const SymbolicSystem& system,
                                             const EmpiricalMeasure& nu);

struct HarmonicFamily {
    EmpiricalMeasure measure;
    long resampled = 0;
    long depth = 0;
    /// Two-sample comparison of nu_-(x) against F(T^{-1}x)_* nu_-(T^{-1}x)
    /// over refreshed pasts.
    PanelComparison martingale;
    std::vector<Flag> samples;
    std::vector<Flag> pushed;
};

/// Keeps the coordinates read by F(x), F(Tx), ... (indices >= c.lo()) and
/// redraws the past M times; atoms are psi_- at horizon n.
HarmonicFamily harmonic_family(const CocycleSpec& c, const OrbitWindow& x, long m, long n, std::uint64_t seed);

/// Largest atom-weighted 90th percentile of flag_distance to the best of
/// the first 32 atoms; returns (diameter, center index).
std::pair<double, std::size_t> measure_diameter(const EmpiricalMeasure& nu);

struct ContractionPoint {
    long n = 0;
    double diameter = 0.0;
    Flag center;
};

struct ContractionCurve {
    std::vector<ContractionPoint> points;
    bool non_increasing = false;
};

/// Pushes nu by F(T^{-1}x)...F(T^{-n}x) for each n.
ContractionCurve dirac_contraction(const CocycleSpec& c, const OrbitWindow& x, const EmpiricalMeasure& nu,
                                   const std::vector<long>& n_list);

struct ProperSubspaceProfile {
    Matrix subspace;
    std::vector<double> masses;
    double exponent = 0.0;
    double exponent_stderr = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct ProperFit {
    std::vector<double> eps;
    std::vector<ProperSubspaceProfile> profiles;
    double max_weight = 0.0;
    bool proper = false;
};

/// Distance of f to the locus {E_{d-k}(f) meets W} for dim W = k.
double distance_to_locus(const Flag& f, const Matrix& w_basis);

/// Masses of eps-neighbourhoods of each locus and a weighted log-log fit
/// mass ~ C eps^c with a 95% interval. Proper iff every lower bound is
/// positive and no atom outweighs 2 / sample_count.
ProperFit properness_profile(const EmpiricalMeasure& nu, const std::vector<Matrix>& subspaces,
                             const std::vector<double>& eps_grid);

struct GrowthRow {
    long n = 0;
    Vector cartan;        // log sigma_i of the backward product
    Vector roots;         // chi_i = log sigma_i - log sigma_{i+1}
};

struct GrowthTable {
    std::vector<GrowthRow> rows;
    bool diverging = false; // every root non-decreasing in n
};

GrowthTable contraction_growth_check(const CocycleSpec& c, const OrbitWindow& x, const std::vector<long>& n_list);

struct GrowthRateEstimate {
    long n = 0;
    std::vector<double> root_rates; // mean of chi_i / n
    std::vector<double> stderrs;
};

/// Ensemble version of contraction_growth_check at a single n.
GrowthRateEstimate growth_rates(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                                std::uint64_t seed);

void write_contraction_csv(std::ostream& out, const ContractionCurve& curve);
void write_properness_csv(std::ostream& out, const ProperFit& fit);

} // namespace cocyclab
