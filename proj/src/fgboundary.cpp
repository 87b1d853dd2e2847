#include "cocyclab/fgboundary.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

namespace cocyclab {

namespace {

std::size_t slot(Letter l) { return static_cast<std::size_t>(2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0)); }

Letter letter_at(std::size_t slot) { return (slot % 2 == 0 ? 1 : -1) * static_cast<Letter>(slot / 2 + 1); }

std::uint64_t word_hash(const ReducedWord& g, std::uint64_t seed)
{
    std::uint64_t h = mix64(seed ^ g.size());
    for (Letter l : g.letters()) {
        h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(l)));
    }
    return h;
}

/// All step sequences (not reduced) of length <= max_len over the law's support.
std::vector<std::vector<Letter>> step_cylinders(const StepLaw& mu, int max_len)
{
    std::vector<Letter> support;
    for (std::size_t i = 0; i < mu.probs().size(); ++i) {
        if (mu.probs()[i] > 0.0) {
            support.push_back(letter_at(i));
        }
    }
    std::vector<std::vector<Letter>> out{{}};
    std::vector<std::vector<Letter>> frontier{{}};
    for (int len = 1; len <= max_len; ++len) {
        std::vector<std::vector<Letter>> next;
        for (const auto& w : frontier) {
            for (Letter l : support) {
                auto v = w;
                v.push_back(l);
                next.push_back(v);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

/// Reduced words of length <= max_len in F_k.
std::vector<ReducedWord> word_cylinders(int k, int max_len)
{
    std::vector<ReducedWord> out{ReducedWord{}};
    std::vector<ReducedWord> frontier{ReducedWord{}};
    for (int len = 1; len <= max_len; ++len) {
        std::vector<ReducedWord> next;
        for (const auto& w : frontier) {
            for (std::size_t s = 0; s < static_cast<std::size_t>(2 * k); ++s) {
                const Letter l = letter_at(s);
                if (!w.empty() && w.letters().back() == -l) {
                    continue;
                }
                auto v = w;
                v.append(l);
                next.push_back(v);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

std::string steps_str(const std::vector<Letter>& steps)
{
    if (steps.empty()) {
        return "e";
    }
    std::string s;
    for (Letter l : steps) {
        s += letter_name(l);
    }
    return s;
}

} // namespace

std::string letter_name(Letter l)
{
    const char base = static_cast<char>('a' + (std::abs(l) - 1));
    return std::string(1, l > 0 ? base : static_cast<char>(std::toupper(base)));
}

Letter letter_from_name(char c)
{
    if (c >= 'a' && c <= 'z') {
        return c - 'a' + 1;
    }
    if (c >= 'A' && c <= 'Z') {
        return -(c - 'A' + 1);
    }
    throw ValidationError(std::string("not a letter: '") + c + "'");
}

// ---------------------------------------------------------------------------
// ReducedWord

ReducedWord ReducedWord::from_letters(const std::vector<Letter>& letters)
{
    ReducedWord w;
    for (Letter l : letters) {
        w.append(l);
    }
    return w;
}

ReducedWord ReducedWord::parse(const std::string& s)
{
    if (s == "e") {
        return {};
    }
    ReducedWord w;
    for (char c : s) {
        w.append(letter_from_name(c));
    }
    return w;
}

void ReducedWord::append(Letter l)
{
    if (l == 0) {
        throw std::invalid_argument("letter 0 is not a generator");
    }
    if (!letters_.empty() && letters_.back() == -l) {
        letters_.pop_back();
    } else {
        letters_.push_back(l);
    }
}

ReducedWord ReducedWord::inverse() const
{
    ReducedWord w;
    w.letters_.reserve(letters_.size());
    for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) {
        w.letters_.push_back(-*it);
    }
    return w;
}

ReducedWord ReducedWord::operator*(const ReducedWord& other) const
{
    ReducedWord w = *this;
    for (Letter l : other.letters_) {
        w.append(l);
    }
    return w;
}

bool ReducedWord::has_prefix(const ReducedWord& p) const
{
    return p.size() <= size() && std::equal(p.letters_.begin(), p.letters_.end(), letters_.begin());
}

ReducedWord ReducedWord::prefix(std::size_t len) const
{
    ReducedWord w;
    const auto n = std::min(len, letters_.size());
    w.letters_.assign(letters_.begin(), letters_.begin() + static_cast<std::ptrdiff_t>(n));
    return w;
}

std::string ReducedWord::str() const { return steps_str(letters_); }

std::size_t tree_distance(const ReducedWord& g, const ReducedWord& h)
{
    std::size_t common = 0;
    while (common < g.size() && common < h.size() && g.letters()[common] == h.letters()[common]) {
        ++common;
    }
    return g.size() + h.size() - 2 * common;
}

// ---------------------------------------------------------------------------
// StepLaw / PathEnsemble

StepLaw::StepLaw(int k, std::vector<double> probs) : k_(k), probs_(std::move(probs))
{
    if (k_ < 1 || k_ > 26) {
        throw ValidationError("step law: rank must be in [1, 26]");
    }
    if (probs_.size() != static_cast<std::size_t>(2 * k_)) {
        throw ValidationError("step law: need 2k probabilities");
    }
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) {
            throw ValidationError("step law: probabilities must be non-negative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ValidationError("step law: probabilities must sum to 1");
    }
    for (int i = 0; i < k_; ++i) {
        if (probs_[static_cast<std::size_t>(2 * i)] + probs_[static_cast<std::size_t>(2 * i + 1)] <= 0.0) {
            throw ValidationError("step law: generator " + letter_name(i + 1) + " has no mass (support must generate)");
        }
    }
}

StepLaw StepLaw::uniform(int k)
{
    return StepLaw(k, std::vector<double>(static_cast<std::size_t>(2 * k), 1.0 / (2.0 * k)));
}

StepLaw StepLaw::from_json(const nlohmann::json& j, int k)
{
    if (j.is_string()) {
        if (j.get<std::string>() != "uniform") {
            throw ValidationError("step law: unknown law '" + j.get<std::string>() + "'");
        }
        return uniform(k);
    }
    if (j.is_array()) {
        return StepLaw(k, j.get<std::vector<double>>());
    }
    if (j.is_object()) {
        std::vector<double> p(static_cast<std::size_t>(2 * k), 0.0);
        for (const auto& [key, value] : j.items()) {
            if (key.size() != 1) {
                throw ValidationError("step law: keys are single letters");
            }
            const Letter l = letter_from_name(key[0]);
            if (std::abs(l) > k) {
                throw ValidationError("step law: letter '" + key + "' outside F_k");
            }
            p[slot(l)] = value.get<double>();
        }
        return StepLaw(k, p);
    }
    throw ValidationError("step law: expected \"uniform\", an array or an object");
}

nlohmann::json StepLaw::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        j[letter_name(letter_at(i))] = probs_[i];
    }
    return j;
}

bool StepLaw::is_uniform() const
{
    return std::all_of(probs_.begin(), probs_.end(), [&](double p) { return p == probs_.front(); });
}

Letter StepLaw::draw(double u) const
{
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        if (probs_[i] <= 0.0) {
            continue;
        }
        last = i;
        acc += probs_[i];
        if (u < acc) {
            return letter_at(i);
        }
    }
    return letter_at(last);
}

double StepLaw::prob(Letter l) const { return probs_.at(slot(l)); }

PathEnsemble PathEnsemble::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ValidationError("ensemble: expected an object");
    }
    for (const char* key : {"k", "n", "count"}) {
        if (!j.contains(key)) {
            throw ValidationError(std::string("ensemble: missing \"") + key + "\"");
        }
    }
    const int k = j["k"].get<int>();
    PathEnsemble e{StepLaw::from_json(j.value("mu", nlohmann::json("uniform")), k), j["n"].get<long>(),
                   j["count"].get<long>(), j.value("seed", std::uint64_t{0})};
    if (e.n < 1 || e.count < 1) {
        throw ValidationError("ensemble: n and count must be >= 1");
    }
    return e;
}

nlohmann::json PathEnsemble::to_json() const
{
    return {{"k", mu.rank()}, {"mu", mu.to_json()}, {"n", n}, {"count", count}, {"seed", seed}};
}

// ---------------------------------------------------------------------------
// paths and boundary points

WalkPath walk_from_steps(const std::vector<Letter>& steps)
{
    WalkPath p;
    p.steps = steps;
    p.pi_lengths.reserve(steps.size() + 1);
    p.check_lengths.reserve(steps.size() + 1);
    p.pi_lengths.push_back(0);
    p.check_lengths.push_back(0);
    for (Letter l : steps) {
        p.pi.append(l);
        p.pi_check.append(-l);
        p.pi_lengths.push_back(p.pi.size());
        p.check_lengths.push_back(p.pi_check.size());
    }
    return p;
}

WalkPath walk_path(const StepLaw& mu, long n, std::uint64_t seed, long index,
                   const std::vector<long>& check_snapshot_times)
{
    CounterStream rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
    WalkPath p;
    p.steps.reserve(static_cast<std::size_t>(n));
    p.pi_lengths.reserve(static_cast<std::size_t>(n + 1));
    p.check_lengths.reserve(static_cast<std::size_t>(n + 1));
    p.pi_lengths.push_back(0);
    p.check_lengths.push_back(0);
    std::size_t next_snapshot = 0;
    auto snapshot = [&](long m) {
        while (next_snapshot < check_snapshot_times.size() && check_snapshot_times[next_snapshot] == m) {
            p.check_snapshots.push_back(p.pi_check);
            ++next_snapshot;
        }
    };
    snapshot(0);
    for (long m = 1; m <= n; ++m) {
        const Letter l = mu.draw(rng.uniform());
        p.steps.push_back(l);
        p.pi.append(l);
        p.pi_check.append(-l);
        p.pi_lengths.push_back(p.pi.size());
        p.check_lengths.push_back(p.pi_check.size());
        snapshot(m);
    }
    return p;
}

std::vector<WalkPath> walk_paths(const PathEnsemble& e)
{
    return parallel_map<WalkPath>(static_cast<std::size_t>(e.count), [&](std::size_t i) {
        return walk_path(e.mu, e.n, e.seed, static_cast<long>(i));
    });
}

std::optional<ReducedWord> boundary_point(const ReducedWord& word, const std::vector<std::size_t>& lengths, long s)
{
    if (s < 1) {
        throw ValidationError("boundary_point: stability s must be >= 1");
    }
    const long n = static_cast<long>(lengths.size()) - 1;
    if (n < s) {
        return std::nullopt;
    }
    std::size_t stable = word.size();
    for (long m = n - s; m <= n; ++m) {
        stable = std::min(stable, lengths[static_cast<std::size_t>(m)]);
    }
    if (stable == 0) {
        return std::nullopt;
    }
    return word.prefix(stable);
}

std::optional<ReducedWord> boundary_point(const WalkPath& path, long s)
{
    return boundary_point(path.pi, path.pi_lengths, s);
}

std::optional<ReducedWord> check_boundary_point(const WalkPath& path, long s)
{
    return boundary_point(path.pi_check, path.check_lengths, s);
}

HarmonicMeasureReport harmonic_measure(const PathEnsemble& e, const std::vector<ReducedWord>& cylinders, long s)
{
    const auto points = parallel_map<std::optional<ReducedWord>>(static_cast<std::size_t>(e.count), [&](std::size_t i) {
        return boundary_point(walk_path(e.mu, e.n, e.seed, static_cast<long>(i)), s);
    });
    HarmonicMeasureReport r;
    for (const auto& p : points) {
        r.resolved += p ? 1 : 0;
    }
    r.resolved_fraction = static_cast<double>(r.resolved) / static_cast<double>(e.count);
    for (const auto& c : cylinders) {
        long hits = 0;
        for (const auto& p : points) {
            hits += p && p->has_prefix(c) ? 1 : 0;
        }
        CylinderEstimate est{c, 0.0, 0.0};
        if (r.resolved > 0) {
            const double n = static_cast<double>(r.resolved);
            est.estimate = static_cast<double>(hits) / n;
            est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / n);
        }
        r.cylinders.push_back(est);
    }
    return r;
}

// ---------------------------------------------------------------------------
// harmonic functions

bool BoundarySet::contains(const ReducedWord& boundary_prefix) const
{
    return boundary_prefix.has_prefix(prefix) != complement;
}

HarmonicFunction::HarmonicFunction(StepLaw mu, BoundarySet d, MonteCarlo mc)
    : mu_(std::move(mu)), d_(std::move(d)), mc_(mc), exact_(mu_.is_uniform())
{
    for (Letter l : d_.prefix.letters()) {
        if (std::abs(l) > mu_.rank()) {
            throw ValidationError("boundary set uses a letter outside F_k");
        }
    }
}

double HarmonicFunction::operator()(const ReducedWord& g) const
{
    const double h = cylinder_value(g);
    return d_.complement ? 1.0 - h : h;
}

double HarmonicFunction::cylinder_value(const ReducedWord& g) const
{
    const ReducedWord& w = d_.prefix;
    if (w.empty()) {
        return 1.0;
    }
    if (exact_) {
        // Simple walk on the 2k-regular tree: a given neighbour is ever hit
        // with probability q = 1/(2k-1), and from the parent of T_w the walk
        // ends through the edge into T_w with probability 1/(2k).
        const double q = 1.0 / (2.0 * mu_.rank() - 1.0);
        const double exit_into = 1.0 / (1.0 + q);
        if (g.has_prefix(w)) {
            const auto depth = static_cast<double>(g.size() - w.size());
            return 1.0 - std::pow(q, depth + 1.0) * exit_into;
        }
        const auto m = static_cast<double>(tree_distance(g, w.prefix(w.size() - 1)));
        return std::pow(q, m + 1.0) * exit_into;
    }
    const std::uint64_t key = word_hash(g, mc_.seed);
    long hits = 0;
    long resolved = 0;
    for (long i = 0; i < mc_.inner_samples; ++i) {
        CounterStream rng(derive_seed(key, static_cast<std::uint64_t>(i)));
        ReducedWord x = g;
        std::vector<std::size_t> lengths{x.size()};
        lengths.reserve(static_cast<std::size_t>(mc_.horizon + 1));
        for (long m = 0; m < mc_.horizon; ++m) {
            x.append(mu_.draw(rng.uniform()));
            lengths.push_back(x.size());
        }
        const auto b = boundary_point(x, lengths, mc_.stability);
        if (b) {
            ++resolved;
            hits += b->has_prefix(w) ? 1 : 0;
        }
    }
    return resolved == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(resolved);
}

MartingaleCurve martingale_check(const PathEnsemble& e, const BoundarySet& d, double eps,
                                 const std::vector<long>& grid, long s, HarmonicMonteCarlo mc)
{
    if (!(eps > 0.0 && eps < 0.5)) {
        throw ValidationError("martingale_check: eps must lie in (0, 1/2)");
    }
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0) {
        throw ValidationError("martingale_check: grid must be non-empty, sorted and non-negative");
    }
    const HarmonicFunction h(e.mu, d, mc);
    const long horizon = grid.back() + s;
    struct Member {
        bool resolved = false;
        std::vector<bool> close;
    };
    const auto members = parallel_map<Member>(static_cast<std::size_t>(e.count), [&](std::size_t i) {
        const WalkPath p = walk_path(e.mu, horizon, e.seed, static_cast<long>(i), grid);
        Member m;
        m.close.assign(grid.size(), false);
        const auto bnd = check_boundary_point(p, s);
        if (!bnd) {
            return m;
        }
        m.resolved = true;
        const double target = d.contains(*bnd) ? 1.0 : 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            m.close[g] = std::abs(h(p.check_snapshots[g]) - target) < eps;
        }
        return m;
    });
    MartingaleCurve curve;
    curve.exact_h = h.exact();
    for (const auto& m : members) {
        curve.unresolved += m.resolved ? 0 : 1;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
        long hits = 0;
        for (const auto& m : members) {
            hits += m.close[g] ? 1 : 0;
        }
        const double n = static_cast<double>(e.count);
        const double f = static_cast<double>(hits) / n;
        curve.points.push_back({grid[g], f, std::sqrt(f * (1.0 - f) / n)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// boundary skew product

SkewInvarianceReport boundary_skew_invariance(const PathEnsemble& e, long n_shift, int max_len, long s)
{
    if (n_shift < 0 || max_len < 1) {
        throw ValidationError("boundary_skew_invariance: n_shift >= 0 and max_len >= 1 required");
    }
    const auto omega_cyls = step_cylinders(e.mu, max_len);
    const auto x_cyls = word_cylinders(e.mu.rank(), max_len);
    const auto len = static_cast<std::size_t>(max_len);

    struct Sample {
        bool ok = false;
        std::vector<Letter> omega_before;
        std::vector<Letter> omega_after;
        ReducedWord x_before;
        ReducedWord x_after;
    };
    const std::uint64_t omega_seed = derive_seed(e.seed, 1);
    const std::uint64_t x_seed = derive_seed(e.seed, 2);
    const auto samples = parallel_map<Sample>(static_cast<std::size_t>(e.count), [&](std::size_t i) {
        Sample smp;
        const WalkPath omega = walk_path(e.mu, n_shift + max_len, omega_seed, static_cast<long>(i));
        const auto x = boundary_point(walk_path(e.mu, e.n, x_seed, static_cast<long>(i)), s);
        if (!x) {
            return smp;
        }
        // S^n: x -> omega_n ... omega_1 . x
        ReducedWord g;
        for (long m = n_shift; m >= 1; --m) {
            g.append(omega.steps[static_cast<std::size_t>(m - 1)]);
        }
        const ReducedWord gx = g * *x;
        // Letters of x beyond the cancelled part stay exact.
        const std::size_t cancelled = (g.size() + x->size() - gx.size()) / 2;
        if (x->size() < cancelled + len || gx.size() < len) {
            return smp;
        }
        smp.ok = true;
        smp.omega_before.assign(omega.steps.begin(), omega.steps.begin() + max_len);
        smp.omega_after.assign(omega.steps.begin() + n_shift, omega.steps.begin() + n_shift + max_len);
        smp.x_before = x->prefix(len);
        smp.x_after = gx.prefix(len);
        return smp;
    });

    SkewInvarianceReport r;
    r.samples = e.count;
    for (const auto& smp : samples) {
        r.skipped += smp.ok ? 0 : 1;
    }
    auto starts_with = [](const std::vector<Letter>& v, const std::vector<Letter>& p) {
        return p.size() <= v.size() && std::equal(p.begin(), p.end(), v.begin());
    };
    for (const auto& oc : omega_cyls) {
        for (const auto& xc : x_cyls) {
            if (oc.empty() && xc.empty()) {
                continue;
            }
            RunningStats before, after, diff;
            for (const auto& smp : samples) {
                if (!smp.ok) {
                    continue;
                }
                const double b = starts_with(smp.omega_before, oc) && smp.x_before.has_prefix(xc) ? 1.0 : 0.0;
                const double a = starts_with(smp.omega_after, oc) && smp.x_after.has_prefix(xc) ? 1.0 : 0.0;
                before.add(b);
                after.add(a);
                diff.add(a - b);
            }
            SkewCell cell{oc, xc, before.mean(), after.mean(), 0.0};
            cell.z = z_score(diff.mean(), 0.0, diff.stderr_mean());
            r.max_z = std::max(r.max_z, cell.z);
            r.cells.push_back(std::move(cell));
        }
    }
    return r;
}

void write_martingale_csv(std::ostream& out, const MartingaleCurve& curve)
{
    out << "n,fraction,stderr\n";
    for (const auto& p : curve.points) {
        out << p.n << ',' << nlohmann::json(p.fraction).dump() << ',' << nlohmann::json(p.stderr_).dump() << '\n';
    }
}

} // namespace cocyclab
