#pragma once

// Matrix cocycles F_n(x) over a symbolic system, integrability estimates and
// skew products over finite permutation actions.

#include "cocyclab/dynamics.hpp"
#include "cocyclab/linalg.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cocyclab {

/// Tolerance for |det - 1| on generator matrices.
inline constexpr double kDetTolerance = 1e-9;

/// Checks SL_d membership and finiteness; throws ValidationError.
void validate_sl(const Matrix& m, const std::string& what);

/// Generator map x -> F(x) in SL_d(R), read from the coordinates
/// x_lo..x_hi through a finite table. The default window [1, 1] makes
/// F(T^k x) = table[x_{k+1}], the random-walk convention.
class CocycleSpec {
public:
    /// `table` is indexed by the mixed-radix code of the window word
    /// (first coordinate most significant).
    CocycleSpec(int dim, long lo, long hi, int alphabet_size, std::vector<Matrix> table);

    /// Table keyed by window words. Single-coordinate windows use the symbol
    /// name; longer windows join names with ','. Every word of positive
    /// probability must be present.
    static CocycleSpec from_table(const SymbolicSystem& system, long lo, long hi,
                                  const std::map<std::string, Matrix>& table);

    /// {"d": n, "window": [lo, hi], "table": {"<symbols>": [[...]]}}
    static CocycleSpec from_json(const json& j, const SymbolicSystem& system);
    json to_json(const SymbolicSystem& system) const;

    int dim() const { return dim_; }
    long lo() const { return lo_; }
    long hi() const { return hi_; }
    std::size_t table_size() const { return table_.size(); }

    std::size_t code(const OrbitWindow& x, long k) const
    {
        std::size_t c = 0;
        for (long i = lo_; i <= hi_; ++i) {
            c = c * static_cast<std::size_t>(alphabet_size_) + static_cast<std::size_t>(x.at(k + i));
        }
        return c;
    }

    /// F(T^k x).
    const Matrix& generator(const OrbitWindow& x, long k) const { return table_[code(x, k)]; }
    /// F(T^k x)^{-1}.
    const Matrix& inverse(const OrbitWindow& x, long k) const { return inverses_[code(x, k)]; }

    const Matrix& by_code(std::size_t c) const { return table_.at(c); }

    /// Coordinates F_n(x) reads: [lo, n - 1 + hi] for n >= 1, [n + lo, hi - 1] for n < 0.
    std::pair<long, long> coordinates_for(long n) const;

    /// True when F(x) depends on a single coordinate of a Bernoulli shift,
    /// i.e. the cocycle is a random walk with step law `step_law()`.
    bool is_random_walk(const SymbolicSystem& system) const;
    /// Step law over table codes (valid for random walks).
    std::vector<double> step_law(const SymbolicSystem& system) const;

private:
    int dim_;
    long lo_;
    long hi_;
    int alphabet_size_;
    std::vector<Matrix> table_;
    std::vector<Matrix> inverses_;
};

/// F_n(x) with a separate power-of-two scale. Throws WindowTooSmall if x
/// does not cover the coordinates the factors read.
ScaledMatrix evaluate(const CocycleSpec& c, const OrbitWindow& x, long n);

/// Product without rescaling (overflows for long products).
Matrix evaluate_naive(const CocycleSpec& c, const OrbitWindow& x, long n);

/// Graded QR form of F_n(x) for n >= 0: F_n(x) = Q diag(exp(log_diag)) U with
/// Q orthogonal and U unit upper triangular. log|det| = sum(log_diag) is
/// accurate to n ulps even when the product is too ill-conditioned for
/// det() of the assembled matrix.
struct GradedProduct {
    Matrix q;
    Vector log_diag;
    Matrix unit_upper;

    double log_abs_det() const { return log_diag.sum(); }
    ScaledMatrix assemble() const;
};

GradedProduct evaluate_graded(const CocycleSpec& c, const OrbitWindow& x, long n);

struct IntegrabilityEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    long ensemble = 0;
};

/// Monte Carlo estimate of the integral of log ||F(x)|| (operator norm).
IntegrabilityEstimate integrability(const CocycleSpec& c, const SymbolicSystem& system, long ensemble,
                                    std::uint64_t seed);

/// Skew product T_f(x, z) = (Tx, f(x).z) over a finite set Z = {0..m-1}
/// with generators acting by permutations. f(x) is the symbol x_window.
class SkewSystem {
public:
    SkewSystem(const SymbolicSystem& base, long window, int z_size, std::vector<std::vector<int>> perms,
               std::vector<double> zeta);

    /// Cocycle JSON plus {"z_size": m, "perms": {"<symbol>": [..]}}, optional
    /// "zeta": [...] (default uniform) and "rho": {"<symbol>": [[[..]] per z]}.
    static SkewSystem from_json(const json& j, const SymbolicSystem& base);

    const SymbolicSystem& base() const { return base_; }
    long window() const { return window_; }
    int z_size() const { return z_size_; }
    const std::vector<double>& zeta() const { return zeta_; }
    const std::vector<int>& perm(Symbol s) const { return perms_.at(static_cast<std::size_t>(s)); }

    /// z-component of T_f applied at time k: f(T^k x).z.
    int step(const OrbitWindow& x, long k, int z) const
    {
        return perms_[static_cast<std::size_t>(x.at(k + window_))][static_cast<std::size_t>(z)];
    }

    /// Markov operator of the z-process, sum_s p(s) Perm_s (Bernoulli base).
    Matrix z_transition() const;

    /// Optional cocycle rho(g, z) in SL_d: matrix for generator s at state z.
    bool has_rho() const { return !rho_.empty(); }
    int rho_dim() const { return rho_.empty() ? 0 : static_cast<int>(rho_.front().rows()); }
    const Matrix& rho(Symbol s, int z) const
    {
        return rho_[static_cast<std::size_t>(s) * static_cast<std::size_t>(z_size_) + static_cast<std::size_t>(z)];
    }
    void set_rho(std::vector<Matrix> rho_by_symbol_then_z);

private:
    SymbolicSystem base_;
    long window_;
    int z_size_;
    std::vector<std::vector<int>> perms_;
    std::vector<double> zeta_;
    std::vector<Matrix> rho_;
};

/// z_0, z_1, ..., z_n along the T_f orbit of (x, z0). Extends x as needed.
std::vector<int> skew_orbit(const SkewSystem& s, OrbitWindow& x, int z0, long n);

/// Product-cylinder observable 1{x_i = s for constraints} * 1{z = z_state};
/// z_state < 0 means no condition on z.
struct SkewObservable {
    std::vector<std::pair<long, Symbol>> x_constraints;
    int z_state = -1;
    std::string name;

    static SkewObservable from_json(const json& j, const SymbolicSystem& system);
};

struct SkewObservableResult {
    std::string name;
    double birkhoff_mean = 0.0;
    double stderr_ = 0.0;
    double space_average = 0.0;
    double z = 0.0;
};

struct SkewErgodicityReport {
    std::vector<SkewObservableResult> observables;
    double max_z = 0.0;
    long n = 0;
    long ensemble = 0;
};

/// Compares Birkhoff averages along T_f orbits against the product-measure
/// space averages m x zeta, per observable, in standard-error units. Every
/// orbit starts at the same z0, so an invariant proper subset of X x Z
/// containing X x {z0} shows up as a discrepancy.
SkewErgodicityReport skew_ergodicity_test(const SkewSystem& s, const std::vector<SkewObservable>& observables,
                                          long n, long ensemble, std::uint64_t seed, int z0 = 0);

} // namespace cocyclab
