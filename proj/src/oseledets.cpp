#include "cocyclab/oseledets.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/json_io.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cocyclab {

namespace {

constexpr std::uint64_t kGenericFrameSeed = 0x5eed'f1a6'0000'0001ULL;
constexpr std::uint64_t kMassStream = 0x6d617373ULL;
constexpr std::uint64_t kKacStream = 0x6b6163ULL;

Matrix generic_frame(int d) { return random_flag(d, kGenericFrameSeed).u(); }

void check_gap(const Vector& growth, const char* which, long n)
{
    const double need = std::log(kFlagGapRatio);
    for (Eigen::Index i = 0; i + 1 < growth.size(); ++i) {
        const double gap = growth(i) - growth(i + 1);
        if (!(gap >= need)) {
            std::ostringstream msg;
            msg << "oseledets flags: " << which << " pass: singular gap " << i + 1 << " reached exp(" << gap << ") over horizon " << n
                << ", below " << kFlagGapRatio;
            throw InsufficientGap(msg.str());
        }
    }
}

double off_diagonal_mass(const Matrix& d)
{
    const double total = d.norm();
    if (!(total > 0.0)) {
        return 0.0;
    }
    Matrix off = d;
    off.diagonal().setZero();
    return off.norm() / total;
}

} // namespace

std::string to_string(Classification c)
{
    switch (c) {
    case Classification::simple:
        return "simple";
    case Classification::non_degenerate:
        return "non_degenerate";
    case Classification::degenerate:
        return "degenerate";
    case Classification::inconclusive:
        return "inconclusive";
    }
    return "inconclusive";
}

// ---------------------------------------------------------------------------
// Spectrum

double Spectrum::trace() const
{
    CompensatedSum s;
    for (double v : exponents) {
        s.add(v);
    }
    return s.value();
}

double Spectrum::trace_stderr() const
{
    RunningStats st;
    for (const auto& row : members) {
        CompensatedSum s;
        for (double v : row) {
            s.add(v);
        }
        st.add(s.value());
    }
    return st.stderr_mean();
}

double Spectrum::trace_tolerance() const { return kSimpleGate * trace_stderr() + kGateFloor; }

nlohmann::json Spectrum::to_json() const
{
    nlohmann::json j;
    j["exponents"] = exponents;
    j["stderrs"] = stderrs;
    j["gap_stderrs"] = gap_stderrs;
    j["multiplicities"] = multiplicities;
    j["classification"] = to_string(classification);
    j["n"] = n;
    j["ensemble"] = ensemble;
    return j;
}

void Spectrum::write_csv(std::ostream& out) const
{
    out << "member";
    for (std::size_t i = 0; i < exponents.size(); ++i) {
        out << ",lambda_" << i + 1;
    }
    out << '\n';
    for (std::size_t m = 0; m < members.size(); ++m) {
        out << m;
        for (double v : members[m]) {
            out << ',' << nlohmann::json(v).dump();
        }
        out << '\n';
    }
}

Spectrum summarize_spectrum(const std::vector<std::vector<double>>& member_columns, long n)
{
    if (member_columns.empty()) {
        throw std::invalid_argument("summarize_spectrum: no members");
    }
    const std::size_t d = member_columns.front().size();
    std::vector<RunningStats> cols(d);
    for (const auto& m : member_columns) {
        for (std::size_t i = 0; i < d; ++i) {
            cols[i].add(m[i]);
        }
    }
    // Columns are averaged before sorting: sorting per member would bias
    // the top exponent upwards whenever the order is not resolved.
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cols[a].mean() > cols[b].mean(); });

    Spectrum s;
    s.n = n;
    s.ensemble = static_cast<long>(member_columns.size());
    for (std::size_t i : order) {
        s.exponents.push_back(cols[i].mean());
        s.stderrs.push_back(cols[i].stderr_mean());
    }
    for (const auto& m : member_columns) {
        std::vector<double> row(d);
        for (std::size_t i = 0; i < d; ++i) {
            row[i] = m[order[i]];
        }
        s.members.push_back(std::move(row));
    }
    std::vector<bool> resolved;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        RunningStats g;
        for (const auto& row : s.members) {
            g.add(row[i] - row[i + 1]);
        }
        s.gap_stderrs.push_back(g.stderr_mean());
        const double gap = s.exponents[i] - s.exponents[i + 1];
        resolved.push_back(gap >= kSimpleGate * g.stderr_mean() + kGateFloor);
    }

    int run = 1;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        if (resolved[i]) {
            s.multiplicities.push_back(run);
            run = 1;
        } else {
            ++run;
        }
    }
    s.multiplicities.push_back(run);

    const bool all_resolved = std::all_of(resolved.begin(), resolved.end(), [](bool b) { return b; });
    const double top = s.exponents.front();
    const double top_se = s.stderrs.front();
    if (all_resolved) {
        s.classification = Classification::simple;
    } else if (top < kDegenerateGate * top_se + kGateFloor) {
        s.classification = Classification::degenerate;
    } else if (top >= kNonDegenerateGate * top_se + kGateFloor) {
        s.classification = Classification::non_degenerate;
    } else {
        s.classification = Classification::inconclusive;
    }
    return s;
}

// ---------------------------------------------------------------------------
// exponent estimators

Vector qr_log_growth(int d, long n, const FactorFn& factor)
{
    Matrix q = Matrix::Identity(d, d);
    Matrix y(d, d);
    Vector rdiag(d);
    std::vector<CompensatedSum> sums(static_cast<std::size_t>(d));
    for (long k = 0; k < n; ++k) {
        y.noalias() = factor(k) * q;
        if (!orthonormalize(y, rdiag)) {
            throw NumericalBreakdown("QR step " + std::to_string(k) + ": R diagonal underflowed");
        }
        q.swap(y);
        for (int i = 0; i < d; ++i) {
            sums[static_cast<std::size_t>(i)].add(std::log(rdiag(i)));
        }
    }
    Vector out(d);
    for (int i = 0; i < d; ++i) {
        out(i) = sums[static_cast<std::size_t>(i)].value();
    }
    return out;
}

Spectrum lyapunov_spectrum(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                           std::uint64_t seed)
{
    if (n < 100 || ensemble < 2) {
        throw ValidationError("lyapunov_spectrum: n >= 100 and ensemble >= 2 required");
    }
    const auto members = parallel_map<std::vector<double>>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(c.lo(), n - 1 + c.hi());
        const Vector g = qr_log_growth(c.dim(), n, [&](long k) -> const Matrix& { return c.generator(x, k); });
        std::vector<double> lam(static_cast<std::size_t>(c.dim()));
        for (int j = 0; j < c.dim(); ++j) {
            lam[static_cast<std::size_t>(j)] = g(j) / static_cast<double>(n);
        }
        return lam;
    });
    return summarize_spectrum(members, n);
}

NormGrowth norm_growth_oracle(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                              std::uint64_t seed)
{
    if (n < 1 || ensemble < 2) {
        throw ValidationError("norm_growth_oracle: n >= 1 and ensemble >= 2 required");
    }
    NormGrowth out;
    out.members = parallel_map<double>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(c.lo(), n - 1 + c.hi());
        const ScaledMatrix p = evaluate(c, x, n);
        return (std::log(operator_norm(p.m)) + p.log_scale()) / static_cast<double>(n);
    });
    RunningStats st;
    for (double v : out.members) {
        st.add(v);
    }
    out.estimate = st.mean();
    out.stderr_ = st.stderr_mean();
    return out;
}

// ---------------------------------------------------------------------------
// flags

OseledetsTrack::OseledetsTrack(const CocycleSpec& c, OrbitWindow x, long n, long length) : length_(length)
{
    if (n < 1 || length < 0) {
        throw ValidationError("oseledets: horizon n >= 1 and length >= 0 required");
    }
    const int d = c.dim();
    const Matrix g0 = generic_frame(d);
    Matrix y(d, d);
    Vector rdiag(d);

    x.extend(-n + c.lo(), length + n - 1 + c.hi());

    minus_.reserve(static_cast<std::size_t>(length + 1));
    Matrix q = g0;
    Vector growth = Vector::Zero(d);
    for (long j = -n; j < length; ++j) {
        y.noalias() = c.generator(x, j) * q;
        if (!orthonormalize(y, rdiag)) {
            throw NumericalBreakdown("forward flag pass collapsed");
        }
        q.swap(y);
        growth += rdiag.array().log().matrix();
        if (j + 1 == 0) {
            check_gap(growth, "forward", n);
        }
        if (j + 1 >= 0) {
            minus_.push_back(Flag::from_orthonormal(q));
        }
    }

    std::vector<Flag> plus_rev;
    plus_rev.reserve(static_cast<std::size_t>(length + 1));
    q = g0;
    growth.setZero();
    for (long j = length + n - 1; j >= 0; --j) {
        y.noalias() = c.inverse(x, j) * q;
        if (!orthonormalize(y, rdiag)) {
            throw NumericalBreakdown("backward flag pass collapsed");
        }
        q.swap(y);
        growth += rdiag.array().log().matrix();
        if (j == length) {
            check_gap(growth, "backward", n);
        }
        if (j <= length) {
            plus_rev.push_back(Flag::from_orthonormal(q));
        }
    }
    plus_.assign(plus_rev.rbegin(), plus_rev.rend());
}

Flag psi_minus(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    if (n < 1) {
        throw ValidationError("psi_minus: horizon n >= 1 required");
    }
    const int d = c.dim();
    OrbitWindow xx = x;
    xx.extend(-n + c.lo(), -1 + c.hi());
    Matrix q = generic_frame(d);
    Matrix y(d, d);
    Vector rdiag(d);
    Vector growth = Vector::Zero(d);
    for (long j = -n; j < 0; ++j) {
        y.noalias() = c.generator(xx, j) * q;
        if (!orthonormalize(y, rdiag)) {
            throw NumericalBreakdown("forward flag pass collapsed");
        }
        q.swap(y);
        growth += rdiag.array().log().matrix();
    }
    check_gap(growth, "forward", n);
    return Flag::from_orthonormal(q);
}

LineTuple OseledetsTrack::lines(long k) const { return tuple_from_flag_pair(psi_minus(k), psi_plus(k)); }

OseledetsFlags oseledets_flags(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    const OseledetsTrack t(c, x, n, 0);
    OseledetsFlags f{t.psi_plus(0), t.psi_minus(0), 0.0};
    f.transversality = general_position(f.psi_minus, f.psi_plus).margin;
    return f;
}

OseledetsFrame frame(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    const OseledetsTrack here(c, x, n, 0);
    const OseledetsTrack next(c, x.shifted(1), n, 0);
    OrbitWindow xx = x;
    xx.extend(c.lo(), c.hi());
    OseledetsFrame f;
    f.basis = here.lines(0).vectors();
    f.conditioning = min_singular_value(f.basis);
    const Matrix cn = next.lines(0).vectors();
    f.conjugated = cn.partialPivLu().solve(c.generator(xx, 0) * f.basis);
    f.off_diagonal_mass = off_diagonal_mass(f.conjugated);
    return f;
}

EquivarianceReport equivariance_check(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                                      std::uint64_t seed)
{
    if (ensemble < 1) {
        throw ValidationError("equivariance_check: ensemble >= 1 required");
    }
    struct Sample {
        bool resolved = false;
        double sine = 0.0;
        double margin = 0.0;
        std::string reason;
    };
    const auto samples = parallel_map<Sample>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        Sample s;
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(c.lo(), c.hi());
        try {
            const OseledetsTrack here(c, x, n, 0);
            const OseledetsTrack next(c, x.shifted(1), n, 0);
            s.margin = general_position(here.psi_minus(0), here.psi_plus(0)).margin;
            const LineTuple lx = here.lines(0);
            const LineTuple ltx = next.lines(0);
            const Matrix pushed = c.generator(x, 0) * lx.vectors();
            for (int j = 0; j < c.dim(); ++j) {
                s.sine = std::max(s.sine, line_sine(pushed.col(j), ltx.line(j)));
            }
            s.resolved = true;
        } catch (const InsufficientGap& e) {
            s.reason = e.what();
        } catch (const NotTransverse& e) {
            s.reason = e.what();
        }
        return s;
    });

    EquivarianceReport r;
    r.samples = ensemble;
    long insufficient = 0;
    long transverse = 0;
    std::string last_reason;
    for (const auto& s : samples) {
        if (!s.resolved) {
            ++insufficient;
            last_reason = s.reason;
            continue;
        }
        r.sines.push_back(s.sine);
        r.transversality.push_back(s.margin);
        transverse += s.margin > kTransversalityThreshold ? 1 : 0;
    }
    if (r.sines.empty()) {
        throw InsufficientGap("equivariance_check: no sample resolved its flags (" + last_reason + ")");
    }
    r.insufficient_gap_fraction = static_cast<double>(insufficient) / static_cast<double>(ensemble);
    r.transverse_fraction = static_cast<double>(transverse) / static_cast<double>(r.sines.size());
    r.median = median(r.sines);
    r.p95 = quantile(r.sines, 0.95);
    return r;
}

FrameReductionReport frame_reduction_check(const CocycleSpec& c, const SymbolicSystem& system, long n,
                                           long orbit_length, long ensemble, std::uint64_t seed)
{
    if (orbit_length < 1 || ensemble < 2) {
        throw ValidationError("frame_reduction_check: orbit_length >= 1 and ensemble >= 2 required");
    }
    const int d = c.dim();
    struct Sample {
        bool resolved = false;
        double off = 0.0;
        double conditioning = 0.0;
        std::vector<double> diag;
    };
    const auto samples = parallel_map<Sample>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        Sample s;
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(c.lo(), orbit_length - 1 + c.hi());
        try {
            const OseledetsFrame f = frame(c, x, n);
            s.off = f.off_diagonal_mass;
            s.conditioning = f.conditioning;
            const OseledetsTrack track(c, x, n, orbit_length);
            std::vector<CompensatedSum> sums(static_cast<std::size_t>(d));
            Matrix basis = track.lines(0).vectors();
            for (long k = 0; k < orbit_length; ++k) {
                const Matrix next = track.lines(k + 1).vectors();
                const Matrix dk = next.partialPivLu().solve(c.generator(x, k) * basis);
                for (int j = 0; j < d; ++j) {
                    sums[static_cast<std::size_t>(j)].add(std::log(std::abs(dk(j, j))));
                }
                basis = next;
            }
            for (const auto& sum : sums) {
                s.diag.push_back(sum.value() / static_cast<double>(orbit_length));
            }
            s.resolved = true;
        } catch (const InsufficientGap&) {
        } catch (const NotTransverse&) {
        }
        return s;
    });

    FrameReductionReport r;
    r.samples = ensemble;
    std::vector<RunningStats> diag(static_cast<std::size_t>(d));
    long failed = 0;
    r.min_conditioning = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        if (!s.resolved) {
            ++failed;
            continue;
        }
        r.off_diagonal.push_back(s.off);
        r.min_conditioning = std::min(r.min_conditioning, s.conditioning);
        for (int j = 0; j < d; ++j) {
            diag[static_cast<std::size_t>(j)].add(s.diag[static_cast<std::size_t>(j)]);
        }
    }
    if (r.off_diagonal.empty()) {
        throw InsufficientGap("frame_reduction_check: no sample resolved its frame");
    }
    r.insufficient_gap_fraction = static_cast<double>(failed) / static_cast<double>(ensemble);
    r.median_off_diagonal = median(r.off_diagonal);
    r.p95_off_diagonal = quantile(r.off_diagonal, 0.95);
    for (const auto& st : diag) {
        r.diagonal_means.push_back(st.mean());
        r.diagonal_stderrs.push_back(st.stderr_mean());
    }
    return r;
}

// ---------------------------------------------------------------------------
// induced systems

InducedSpectrumReport induced_spectrum_check(const CocycleSpec& c, const SymbolicSystem& system,
                                             const Indicator& indicator, long n, long ensemble, std::uint64_t seed,
                                             long mass_ensemble)
{
    InducedSpectrumReport r;
    r.base = lyapunov_spectrum(c, system, n, ensemble, seed);
    const InducedSystem induced = induce(system, indicator, mass_ensemble, derive_seed(seed, kMassStream));
    r.measured_mass = induced.measured_mass();
    r.mass_stderr = induced.mass_stderr();
    if (r.measured_mass < 0.05) {
        throw ValidationError("induced_spectrum_check: indicator mass below 0.05");
    }

    const auto members = parallel_map<std::vector<double>>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x = induced.sample_point(derive_seed(seed, i));
        const auto times = induced.return_times(x, n);
        const long base_steps = std::accumulate(times.begin(), times.end(), 0L);
        x.extend(c.lo(), base_steps - 1 + c.hi());
        const Vector g =
            qr_log_growth(c.dim(), base_steps, [&](long k) -> const Matrix& { return c.generator(x, k); });
        std::vector<double> lam(static_cast<std::size_t>(c.dim()));
        for (int j = 0; j < c.dim(); ++j) {
            lam[static_cast<std::size_t>(j)] = g(j) / static_cast<double>(n);
        }
        return lam;
    });
    r.induced = summarize_spectrum(members, n);

    r.expected_ratio = 1.0 / r.measured_mass;
    for (std::size_t i = 0; i < r.base.exponents.size(); ++i) {
        const double base = r.base.exponents[i];
        r.ratios.push_back(r.induced.exponents[i] / base);
        if (std::abs(base) >= kSimpleGate * r.base.stderrs[i] + kGateFloor) {
            r.max_relative_deviation =
                std::max(r.max_relative_deviation, std::abs(r.ratios.back() - r.expected_ratio) / r.expected_ratio);
        }
    }
    r.returns = induced.mean_return(mass_ensemble, derive_seed(seed, kKacStream));
    r.kac = kac_check(induced, r.returns);
    return r;
}

Indicator frame_conditioning_indicator(const CocycleSpec& c, long n, double threshold)
{
    std::ostringstream name;
    name << "frame_conditioning(n=" << n << ")>=" << threshold;
    return Indicator(
        -n + c.lo(), n - 1 + c.hi(),
        [c, n, threshold](const OrbitWindow& x, long k) {
            try {
                const OseledetsTrack t(c, x.shifted(k), n, 0);
                return min_singular_value(t.lines(0).vectors()) >= threshold;
            } catch (const InsufficientGap&) {
                return false;
            } catch (const NotTransverse&) {
                return false;
            }
        },
        name.str());
}

Spectrum skew_lyapunov_spectrum(const SkewSystem& s, long n, long ensemble, std::uint64_t seed)
{
    if (!s.has_rho()) {
        throw ValidationError("skew spectrum: the skew system has no rho table");
    }
    if (n < 100 || ensemble < 2) {
        throw ValidationError("skew spectrum: n >= 100 and ensemble >= 2 required");
    }
    const int d = s.rho_dim();
    const auto members = parallel_map<std::vector<double>>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        const std::uint64_t member_seed = derive_seed(seed, i);
        OrbitWindow x(s.base(), member_seed);
        x.extend(s.window(), n - 1 + s.window());
        CounterStream rng(derive_seed(member_seed, 1));
        const double u = rng.uniform();
        int z = s.z_size() - 1;
        double acc = 0.0;
        for (int k = 0; k < s.z_size(); ++k) {
            acc += s.zeta()[static_cast<std::size_t>(k)];
            if (u < acc) {
                z = k;
                break;
            }
        }
        const Vector g = qr_log_growth(d, n, [&](long k) -> const Matrix& {
            const Matrix& m = s.rho(x.at(k + s.window()), z);
            z = s.step(x, k, z);
            return m;
        });
        std::vector<double> lam(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            lam[static_cast<std::size_t>(j)] = g(j) / static_cast<double>(n);
        }
        return lam;
    });
    return summarize_spectrum(members, n);
}

// ---------------------------------------------------------------------------
// Cartan projection

Vector cartan_projection(const GradedProduct& g)
{
    const int d = static_cast<int>(g.log_diag.size());
    Vector partial(d + 1);
    partial(0) = 0.0;
    for (int k = 1; k <= d; ++k) {
        // ||wedge^k (D U)|| with wedge^k D diagonal over index sets.
        const auto sets = combinations(d, k);
        Vector logs(static_cast<Eigen::Index>(sets.size()));
        for (std::size_t r = 0; r < sets.size(); ++r) {
            double s = 0.0;
            for (int i : sets[r]) {
                s += g.log_diag(i);
            }
            logs(static_cast<Eigen::Index>(r)) = s;
        }
        const double top = logs.maxCoeff();
        const Matrix cu = compound(g.unit_upper, k);
        const Matrix scaled = (logs.array() - top).exp().matrix().asDiagonal() * cu;
        partial(k) = top + std::log(operator_norm(scaled));
    }
    Vector out(d);
    for (int k = 0; k < d; ++k) {
        out(k) = partial(k + 1) - partial(k);
    }
    return out;
}

} // namespace cocyclab
