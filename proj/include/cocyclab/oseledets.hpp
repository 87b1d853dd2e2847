#pragma once

// Lyapunov spectra, finite-horizon Oseledets flags and frames, and the
// induced-system rescaling check.

#include "cocyclab/cocycle.hpp"
#include "cocyclab/dynamics.hpp"
#include "cocyclab/flagspace.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cocyclab {

enum class Classification { simple, non_degenerate, degenerate, inconclusive };

std::string to_string(Classification c);

/// Statistical gates, in units of the relevant standard error.
inline constexpr double kSimpleGate = 5.0;
inline constexpr double kDegenerateGate = 3.0;
inline constexpr double kNonDegenerateGate = 5.0;
/// Added to every gate so that zero-variance runs compare exact values.
inline constexpr double kGateFloor = 1e-12;

struct Spectrum {
    std::vector<double> exponents; // non-increasing
    std::vector<double> stderrs;
    /// stderr of exponents[i] - exponents[i+1] from per-member differences.
    std::vector<double> gap_stderrs;
    std::vector<int> multiplicities;
    Classification classification = Classification::inconclusive;
    long n = 0;
    long ensemble = 0;
    /// Per-member exponents, columns in the order of `exponents`.
    std::vector<std::vector<double>> members;

    double trace() const;
    /// stderr of the per-member sums of exponents.
    double trace_stderr() const;
    double trace_tolerance() const; // 5 * trace_stderr plus the gate floor

    nlohmann::json to_json() const;
    /// Header "member,lambda_1,...,lambda_d" and one row per member.
    void write_csv(std::ostream& out) const;
};

/// Mean per column, then sorts columns by mean and classifies.
Spectrum summarize_spectrum(const std::vector<std::vector<double>>& member_columns, long n);

/// Factor at step k of a product read left to right in time.
using FactorFn = std::function<const Matrix&(long k)>;

/// Sum over k < n of log R_kk for Q_{k+1} R_{k+1} = factor(k) Q_k, Q_0 = I.
/// Throws NumericalBreakdown if a diagonal entry of R underflows.
Vector qr_log_growth(int d, long n, const FactorFn& factor);

Spectrum lyapunov_spectrum(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                           std::uint64_t seed);

struct NormGrowth {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::vector<double> members;
};

/// (1/n) log ||F_n(x)|| from rescaled products, averaged over the ensemble.
NormGrowth norm_growth_oracle(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                              std::uint64_t seed);

/// Accumulated singular-gap ratio a horizon must reach before its flag is read.
inline constexpr double kFlagGapRatio = 1e3;

/// psi_- and psi_+ along the orbit segment T^k x, k in [0, length], from one
/// forward pass started at T^{-n} x and one backward pass started at
/// T^{length+n} x, both from a fixed generic frame.
///
/// psi_-(y) attracts F(T^{-1}y)...F(T^{-n}y); psi_+(y) attracts
/// F(y)^{-1}...F(T^{n-1}y)^{-1}, so E_1(psi_+) is the slowest direction.
class OseledetsTrack {
public:
    /// Throws InsufficientGap if either pass fails to separate its singular
    /// directions by kFlagGapRatio within the horizon n.
    OseledetsTrack(const CocycleSpec& c, OrbitWindow x, long n, long length);

    long length() const { return length_; }
    const Flag& psi_minus(long k) const { return minus_.at(static_cast<std::size_t>(k)); }
    const Flag& psi_plus(long k) const { return plus_.at(static_cast<std::size_t>(k)); }
    /// Splitting lines L_1(T^k x), ..., L_d(T^k x). Throws NotTransverse.
    LineTuple lines(long k) const;

private:
    long length_;
    std::vector<Flag> minus_;
    std::vector<Flag> plus_;
};

/// psi_-(x) alone (forward pass only). Throws InsufficientGap.
Flag psi_minus(const CocycleSpec& c, const OrbitWindow& x, long n);

struct OseledetsFlags {
    Flag psi_plus;
    Flag psi_minus;
    /// general_position margin of (psi_-, psi_+).
    double transversality = 0.0;
};

OseledetsFlags oseledets_flags(const CocycleSpec& c, const OrbitWindow& x, long n);

struct OseledetsFrame {
    /// Columns span L_1(x), ..., L_d(x), unit length.
    Matrix basis;
    double conditioning = 0.0;
    /// C(Tx)^{-1} F(x) C(x) with C the column bases; diagonal in the limit.
    Matrix conjugated;
    /// ||offdiag(D)||_F / ||D||_F.
    double off_diagonal_mass = 0.0;
};

/// Frames at x and Tx from independent horizons of length n.
OseledetsFrame frame(const CocycleSpec& c, const OrbitWindow& x, long n);

struct EquivarianceReport {
    /// max_j sin angle(F(x) L_j(x), L_j(Tx)) per resolved sample.
    std::vector<double> sines;
    double median = 0.0;
    double p95 = 0.0;
    std::vector<double> transversality;
    double transverse_fraction = 0.0;
    double insufficient_gap_fraction = 0.0;
    long samples = 0;
};

/// Throws InsufficientGap when no sample resolves.
EquivarianceReport equivariance_check(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                                      std::uint64_t seed);

struct FrameReductionReport {
    std::vector<double> off_diagonal;
    double median_off_diagonal = 0.0;
    double p95_off_diagonal = 0.0;
    /// Ensemble mean and stderr of orbit averages of log|D_ii|.
    std::vector<double> diagonal_means;
    std::vector<double> diagonal_stderrs;
    double min_conditioning = 0.0;
    double insufficient_gap_fraction = 0.0;
    long samples = 0;
};

FrameReductionReport frame_reduction_check(const CocycleSpec& c, const SymbolicSystem& system, long n,
                                           long orbit_length, long ensemble, std::uint64_t seed);

struct InducedSpectrumReport {
    Spectrum base;
    Spectrum induced;
    double measured_mass = 0.0;
    double mass_stderr = 0.0;
    std::vector<double> ratios; // induced / base per exponent
    double expected_ratio = 0.0; // 1 / measured_mass
    double max_relative_deviation = 0.0;
    MeanEstimate returns;
    KacCheck kac;
};

/// Spectrum of F*(x) = F_{n(x)}(x) over n induced steps from m*-distributed
/// points, against the base spectrum over n base steps with the same
/// member seeds.
InducedSpectrumReport induced_spectrum_check(const CocycleSpec& c, const SymbolicSystem& system,
                                             const Indicator& indicator, long n, long ensemble, std::uint64_t seed,
                                             long mass_ensemble = 100'000);

/// Indicator of points whose finite-horizon frame has conditioning above
/// `threshold`; reads coordinates [-n + lo, n - 1 + hi].
Indicator frame_conditioning_indicator(const CocycleSpec& c, long n, double threshold);

/// Spectrum of the cocycle (x, z) -> rho(x_window, z) over the skew product.
Spectrum skew_lyapunov_spectrum(const SkewSystem& s, long n, long ensemble, std::uint64_t seed);

/// log sigma_1 >= ... >= log sigma_d of the graded product, accurate in
/// absolute terms even when sigma_1 / sigma_d overflows.
Vector cartan_projection(const GradedProduct& g);

} // namespace cocyclab
