#include "cocyclab/stationary.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/json_io.hpp"
#include "cocyclab/oseledets.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>

namespace cocyclab {

namespace {

constexpr std::uint64_t kPanelSeed = 0x7061'6e65'6c00'0000ULL;
constexpr std::size_t kDiameterCandidates = 32;
constexpr double kDiameterQuantile = 0.9;

/// u <- GS(g u).
void push(Matrix& u, const Matrix& g, Matrix& scratch, Vector& rdiag)
{
    scratch.noalias() = g * u;
    if (!orthonormalize(scratch, rdiag)) {
        throw NumericalBreakdown("flag push collapsed");
    }
    u.swap(scratch);
}

std::string bytes_of(const Matrix& m)
{
    std::string key(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
    std::memcpy(key.data(), m.data(), key.size());
    return key;
}

double weighted_quantile(std::vector<std::pair<double, double>> dist_weight, double q)
{
    std::sort(dist_weight.begin(), dist_weight.end());
    double acc = 0.0;
    for (const auto& [dist, w] : dist_weight) {
        acc += w;
        if (acc >= q - 1e-12) {
            return dist;
        }
    }
    return dist_weight.back().first;
}

PanelComparison finish(const std::array<RunningStats, kPanelSize>& a, const std::array<RunningStats, kPanelSize>& b,
                       const std::array<double, kPanelSize>& sigma)
{
    PanelComparison out;
    for (int k = 0; k < kPanelSize; ++k) {
        out.left[k] = a[k].mean();
        out.right[k] = b[k].mean();
        out.sigma[k] = sigma[k];
        out.z[k] = z_score(out.left[k], out.right[k], sigma[k]);
        out.max_z = std::max(out.max_z, out.z[k]);
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// EmpiricalMeasure

EmpiricalMeasure::EmpiricalMeasure(const std::vector<Flag>& flags)
{
    if (flags.empty()) {
        throw ValidationError("empirical measure needs at least one atom");
    }
    const double w = 1.0 / static_cast<double>(flags.size());
    atoms_.reserve(flags.size());
    for (const auto& f : flags) {
        atoms_.push_back({f, w});
    }
    sample_count_ = static_cast<long>(flags.size());
    merge_equal();
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<Atom> atoms, long sample_count)
    : atoms_(std::move(atoms)), sample_count_(sample_count)
{
    if (atoms_.empty()) {
        throw ValidationError("empirical measure needs at least one atom");
    }
    CompensatedSum total;
    for (const auto& a : atoms_) {
        if (!(a.weight >= 0.0)) {
            throw ValidationError("empirical measure: negative weight");
        }
        total.add(a.weight);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
        throw ValidationError("empirical measure: weights do not sum to 1");
    }
    if (sample_count_ < static_cast<long>(atoms_.size())) {
        sample_count_ = static_cast<long>(atoms_.size());
    }
    merge_equal();
}

void EmpiricalMeasure::merge_equal()
{
    std::map<std::string, std::size_t> seen;
    std::vector<Atom> merged;
    merged.reserve(atoms_.size());
    for (auto& a : atoms_) {
        const auto [it, inserted] = seen.emplace(bytes_of(a.flag.u()), merged.size());
        if (inserted) {
            merged.push_back(std::move(a));
        } else {
            merged[it->second].weight += a.weight;
        }
    }
    atoms_ = std::move(merged);
}

double EmpiricalMeasure::max_weight() const
{
    double w = 0.0;
    for (const auto& a : atoms_) {
        w = std::max(w, a.weight);
    }
    return w;
}

EmpiricalMeasure EmpiricalMeasure::pushforward(const Matrix& g) const
{
    std::vector<Atom> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) {
        out.push_back({act(g, a.flag), a.weight});
    }
    return EmpiricalMeasure(std::move(out), sample_count_);
}

nlohmann::json EmpiricalMeasure::to_json() const
{
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : atoms_) {
        atoms.push_back({{"flag", a.flag.to_json()}, {"weight", a.weight}});
    }
    return {{"atoms", atoms}, {"sample_count", sample_count_}};
}

EmpiricalMeasure EmpiricalMeasure::from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("atoms")) {
        throw ValidationError("measure JSON needs \"atoms\"");
    }
    std::vector<Atom> atoms;
    for (const auto& a : j["atoms"]) {
        atoms.push_back({Flag::from_json(a.at("flag")), a.at("weight").get<double>()});
    }
    const long count = j.value("sample_count", static_cast<long>(atoms.size()));
    return EmpiricalMeasure(std::move(atoms), count);
}

// ---------------------------------------------------------------------------
// test panel

TestPanel::TestPanel(int d)
{
    for (int k = 0; k < kPanelSize; ++k) {
        directions_.push_back(random_flag(d, derive_seed(kPanelSeed, static_cast<std::uint64_t>(k))).line());
    }
}

std::array<double, kPanelSize> TestPanel::operator()(const Flag& f) const
{
    std::array<double, kPanelSize> out{};
    const Vector u = f.line();
    const Vector v = f.hyperplane_normal();
    for (int k = 0; k < kPanelSize / 2; ++k) {
        out[k] = std::abs(u.dot(directions_[static_cast<std::size_t>(k)]));
        out[k + kPanelSize / 2] = std::abs(v.dot(directions_[static_cast<std::size_t>(k + kPanelSize / 2)]));
    }
    return out;
}

PanelComparison compare_samples(const std::vector<Flag>& a, const std::vector<Flag>& b)
{
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("compare_samples: empty sample");
    }
    const TestPanel panel(a.front().dim());
    std::array<RunningStats, kPanelSize> sa;
    std::array<RunningStats, kPanelSize> sb;
    for (const auto& f : a) {
        const auto v = panel(f);
        for (int k = 0; k < kPanelSize; ++k) {
            sa[k].add(v[k]);
        }
    }
    for (const auto& f : b) {
        const auto v = panel(f);
        for (int k = 0; k < kPanelSize; ++k) {
            sb[k].add(v[k]);
        }
    }
    std::array<double, kPanelSize> sigma{};
    for (int k = 0; k < kPanelSize; ++k) {
        sigma[k] = std::hypot(sa[k].stderr_mean(), sb[k].stderr_mean());
    }
    return finish(sa, sb, sigma);
}

// ---------------------------------------------------------------------------
// stationary measure

StationaryEstimate estimate_stationary(const CocycleSpec& c, const SymbolicSystem& system, long burn, long samples,
                                       std::uint64_t seed)
{
    if (burn < 10 || samples < 2) {
        throw ValidationError("estimate_stationary: burn >= 10 and samples >= 2 required");
    }
    const int d = c.dim();
    struct Pair {
        Flag atom;
        Flag refreshed;
    };
    const auto pairs = parallel_map<Pair>(static_cast<std::size_t>(samples), [&](std::size_t i) {
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(c.lo(), burn + c.hi());
        Matrix u = Matrix::Identity(d, d);
        Matrix scratch(d, d);
        Vector rdiag(d);
        for (long k = 0; k < burn; ++k) {
            push(u, c.generator(x, k), scratch, rdiag);
        }
        Matrix v = u;
        push(v, c.generator(x, burn), scratch, rdiag);
        return Pair{Flag::from_orthonormal(u), Flag::from_orthonormal(v)};
    });

    const TestPanel panel(d);
    std::array<RunningStats, kPanelSize> before;
    std::array<RunningStats, kPanelSize> after;
    std::array<RunningStats, kPanelSize> diff;
    std::vector<Flag> atoms;
    atoms.reserve(pairs.size());
    for (const auto& p : pairs) {
        const auto a = panel(p.atom);
        const auto b = panel(p.refreshed);
        for (int k = 0; k < kPanelSize; ++k) {
            before[k].add(a[k]);
            after[k].add(b[k]);
            diff[k].add(b[k] - a[k]);
        }
        atoms.push_back(p.atom);
    }
    std::array<double, kPanelSize> sigma{};
    for (int k = 0; k < kPanelSize; ++k) {
        sigma[k] = diff[k].stderr_mean();
    }
    return StationaryEstimate{EmpiricalMeasure(atoms), finish(before, after, sigma), burn};
}

FurstenbergEstimate furstenberg_top_exponent(const CocycleSpec& c, const SymbolicSystem& system,
                                             const EmpiricalMeasure& nu)
{
    if (!c.is_random_walk(system)) {
        throw ValidationError("furstenberg_top_exponent: needs an i.i.d. single-coordinate cocycle");
    }
    if (nu.dim() != c.dim()) {
        throw ValidationError("furstenberg_top_exponent: measure and cocycle dimensions differ");
    }
    const auto law = c.step_law(system);
    std::vector<double> values;
    values.reserve(nu.atoms().size());
    for (const auto& a : nu.atoms()) {
        const Vector v = a.flag.line();
        double s = 0.0;
        for (std::size_t g = 0; g < law.size(); ++g) {
            if (law[g] > 0.0) {
                s += law[g] * std::log((c.by_code(g) * v).norm());
            }
        }
        values.push_back(s);
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        mean += nu.atoms()[i].weight * values[i];
    }
    double var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double dv = values[i] - mean;
        var += nu.atoms()[i].weight * dv * dv;
    }
    const auto n = static_cast<double>(nu.sample_count());
    FurstenbergEstimate out;
    out.estimate = mean;
    out.stderr_ = n > 1.0 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// harmonic family

HarmonicFamily harmonic_family(const CocycleSpec& c, const OrbitWindow& x, long m, long n, std::uint64_t seed)
{
    if (m < 2 || n < 1) {
        throw ValidationError("harmonic_family: M >= 2 and n >= 1 required");
    }
    const long boundary = c.lo();
    const int d = c.dim();
    struct Draw {
        Flag sample;
        Flag pushed;
    };
    const auto draws = parallel_map<Draw>(static_cast<std::size_t>(m), [&](std::size_t i) {
        const OrbitWindow y = x.with_resampled_past(boundary, derive_seed(seed, 2 * i));
        const Flag sample = psi_minus(c, y, n);
        // Refresh the coordinate boundary - 1 given the frozen future, then
        // push psi_-(T^{-1} y') forward by F(T^{-1} y').
        OrbitWindow yy = y.with_resampled_past(boundary - 1, derive_seed(seed, 2 * i + 1));
        yy.extend(-1 + c.lo(), -1 + c.hi());
        Matrix u = psi_minus(c, yy.shifted(-1), n).u();
        Matrix scratch(d, d);
        Vector rdiag(d);
        push(u, c.generator(yy, -1), scratch, rdiag);
        return Draw{sample, Flag::from_orthonormal(u)};
    });
    HarmonicFamily h{EmpiricalMeasure(std::vector<Flag>{Flag::standard(d)}), m, n, {}, {}, {}};
    for (const auto& dr : draws) {
        h.samples.push_back(dr.sample);
        h.pushed.push_back(dr.pushed);
    }
    h.measure = EmpiricalMeasure(h.samples);
    h.martingale = compare_samples(h.samples, h.pushed);
    return h;
}

// ---------------------------------------------------------------------------
// Dirac contraction

std::pair<double, std::size_t> measure_diameter(const EmpiricalMeasure& nu)
{
    const auto& atoms = nu.atoms();
    const std::size_t candidates = std::min(kDiameterCandidates, atoms.size());
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    std::vector<std::pair<double, double>> dw(atoms.size());
    for (std::size_t c = 0; c < candidates; ++c) {
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            dw[i] = {flag_distance(atoms[c].flag, atoms[i].flag), atoms[i].weight};
        }
        const double q = weighted_quantile(dw, kDiameterQuantile);
        if (q < best) {
            best = q;
            best_index = c;
        }
    }
    return {best, best_index};
}

ContractionCurve dirac_contraction(const CocycleSpec& c, const OrbitWindow& x, const EmpiricalMeasure& nu,
                                   const std::vector<long>& n_list)
{
    if (nu.dim() != c.dim()) {
        throw ValidationError("dirac_contraction: measure and cocycle dimensions differ");
    }
    const int d = c.dim();
    ContractionCurve curve;
    OrbitWindow xx = x;
    for (long n : n_list) {
        if (n < 0) {
            throw ValidationError("dirac_contraction: n must be >= 0");
        }
        xx.extend(-n + c.lo(), -1 + c.hi());
        std::vector<Atom> pushed;
        pushed.reserve(nu.atoms().size());
        Matrix scratch(d, d);
        Vector rdiag(d);
        for (const auto& a : nu.atoms()) {
            Matrix u = a.flag.u();
            for (long j = -n; j < 0; ++j) {
                push(u, c.generator(xx, j), scratch, rdiag);
            }
            pushed.push_back({Flag::from_orthonormal(u), a.weight});
        }
        const EmpiricalMeasure image(std::move(pushed), nu.sample_count());
        const auto [diameter, center] = measure_diameter(image);
        curve.points.push_back({n, diameter, image.atoms()[center].flag});
    }
    curve.non_increasing = true;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (curve.points[i].diameter > curve.points[i - 1].diameter + 1e-12) {
            curve.non_increasing = false;
        }
    }
    return curve;
}

// ---------------------------------------------------------------------------
// properness

double distance_to_locus(const Flag& f, const Matrix& w_basis)
{
    const int d = f.dim();
    const auto k = static_cast<int>(w_basis.cols());
    if (k < 1 || k >= d || w_basis.rows() != d) {
        throw ValidationError("properness: subspace must be proper and non-zero");
    }
    Matrix w = w_basis;
    Vector rdiag;
    if (!orthonormalize(w, rdiag)) {
        throw ValidationError("properness: subspace basis is degenerate");
    }
    return min_principal_angle(f.subspace(d - k), w);
}

ProperFit properness_profile(const EmpiricalMeasure& nu, const std::vector<Matrix>& subspaces,
                             const std::vector<double>& eps_grid)
{
    if (eps_grid.size() < 2) {
        throw ValidationError("properness: need at least two eps values");
    }
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0) || (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))) {
            throw ValidationError("properness: eps grid must be positive and decreasing");
        }
    }
    const auto n = static_cast<double>(nu.sample_count());
    ProperFit fit;
    fit.eps = eps_grid;
    fit.max_weight = nu.max_weight();
    bool all_positive = true;
    for (const auto& w : subspaces) {
        ProperSubspaceProfile p;
        p.subspace = w;
        std::vector<double> dist;
        dist.reserve(nu.atoms().size());
        for (const auto& a : nu.atoms()) {
            dist.push_back(distance_to_locus(a.flag, w));
        }
        // Weighted least squares of log p on log eps with var(log p) ~ (1-p)/(N p).
        double sw = 0.0, sx = 0.0, sy = 0.0;
        std::vector<double> xs, ys, ws;
        for (double eps : eps_grid) {
            double mass = 0.0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                if (dist[i] < eps) {
                    mass += nu.atoms()[i].weight;
                }
            }
            p.masses.push_back(mass);
            const double phat = (mass * n + 0.5) / (n + 1.0);
            const double var = (1.0 - phat) / (n * phat);
            xs.push_back(std::log(eps));
            ys.push_back(std::log(phat));
            ws.push_back(1.0 / var);
            sw += ws.back();
            sx += ws.back() * xs.back();
            sy += ws.back() * ys.back();
        }
        const double xbar = sx / sw;
        const double ybar = sy / sw;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += ws[i] * (xs[i] - xbar) * (xs[i] - xbar);
            sxy += ws[i] * (xs[i] - xbar) * (ys[i] - ybar);
        }
        p.exponent = sxy / sxx;
        p.exponent_stderr = 1.0 / std::sqrt(sxx);
        p.ci_low = p.exponent - 1.96 * p.exponent_stderr;
        p.ci_high = p.exponent + 1.96 * p.exponent_stderr;
        all_positive = all_positive && p.ci_low > 0.0;
        fit.profiles.push_back(std::move(p));
    }
    fit.proper = all_positive && fit.max_weight <= 2.0 / n;
    return fit;
}

// ---------------------------------------------------------------------------
// contraction -> growth

GrowthTable contraction_growth_check(const CocycleSpec& c, const OrbitWindow& x, const std::vector<long>& n_list)
{
    GrowthTable t;
    OrbitWindow xx = x;
    for (long n : n_list) {
        if (n < 1) {
            throw ValidationError("contraction_growth_check: n must be >= 1");
        }
        xx.extend(-n + c.lo(), -1 + c.hi());
        const GradedProduct g = evaluate_graded(c, xx.shifted(-n), n);
        GrowthRow row;
        row.n = n;
        row.cartan = cartan_projection(g);
        row.roots = row.cartan.head(c.dim() - 1) - row.cartan.tail(c.dim() - 1);
        t.rows.push_back(std::move(row));
    }
    t.diverging = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        if ((t.rows[i].roots.array() < t.rows[i - 1].roots.array()).any()) {
            t.diverging = false;
        }
    }
    return t;
}

GrowthRateEstimate growth_rates(const CocycleSpec& c, const SymbolicSystem& system, long n, long ensemble,
                                std::uint64_t seed)
{
    if (n < 1 || ensemble < 2) {
        throw ValidationError("growth_rates: n >= 1 and ensemble >= 2 required");
    }
    const auto members = parallel_map<Vector>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x(system, derive_seed(seed, i));
        return Vector(contraction_growth_check(c, x, {n}).rows.front().roots / static_cast<double>(n));
    });
    GrowthRateEstimate out;
    out.n = n;
    for (int j = 0; j + 1 < c.dim(); ++j) {
        RunningStats st;
        for (const auto& v : members) {
            st.add(v(j));
        }
        out.root_rates.push_back(st.mean());
        out.stderrs.push_back(st.stderr_mean());
    }
    return out;
}

void write_contraction_csv(std::ostream& out, const ContractionCurve& curve)
{
    out << "n,diameter\n";
    for (const auto& p : curve.points) {
        out << p.n << ',' << nlohmann::json(p.diameter).dump() << '\n';
    }
}

void write_properness_csv(std::ostream& out, const ProperFit& fit)
{
    out << "subspace,eps,mass\n";
    for (std::size_t s = 0; s < fit.profiles.size(); ++s) {
        for (std::size_t e = 0; e < fit.eps.size(); ++e) {
            out << s << ',' << nlohmann::json(fit.eps[e]).dump() << ','
                << nlohmann::json(fit.profiles[s].masses[e]).dump() << '\n';
        }
    }
}

} // namespace cocyclab
