#include "cocyclab/dynamics.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cocyclab {

namespace {

constexpr double kProbTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

Symbol draw_from(const double* probs, int n, double u)
{
    double acc = 0.0;
    int last_positive = -1;
    for (int s = 0; s < n; ++s) {
        if (probs[s] <= 0.0) {
            continue;
        }
        last_positive = s;
        acc += probs[s];
        if (u < acc) {
            return s;
        }
    }
    if (last_positive < 0) {
        throw std::domain_error("draw from an all-zero probability vector");
    }
    return last_positive;
}

void check_distribution(const std::vector<double>& p, const std::string& what)
{
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError(what + ": probabilities must be finite and non-negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
        throw ValidationError(what + ": probabilities sum to " + std::to_string(sum) + ", not 1");
    }
}

Matrix matrix_power(const Matrix& p, long e)
{
    Matrix result = Matrix::Identity(p.rows(), p.cols());
    Matrix base = p;
    while (e > 0) {
        if (e & 1) {
            result = result * base;
        }
        base = base * base;
        e >>= 1;
    }
    return result;
}

} // namespace

// ---------------------------------------------------------------------------
// SymbolicSystem

SymbolicSystem SymbolicSystem::bernoulli(std::vector<std::string> alphabet, std::vector<double> probs,
                                         std::uint64_t seed)
{
    SymbolicSystem s;
    s.kind_ = Kind::bernoulli;
    s.alphabet_ = std::move(alphabet);
    s.marginal_ = std::move(probs);
    s.seed_ = seed;
    s.validate();
    return s;
}

SymbolicSystem SymbolicSystem::markov(std::vector<std::string> alphabet, Matrix transition,
                                      std::optional<std::vector<double>> stationary, std::uint64_t seed)
{
    SymbolicSystem s;
    s.kind_ = Kind::markov;
    s.alphabet_ = std::move(alphabet);
    s.transition_ = std::move(transition);
    s.seed_ = seed;
    const auto k = static_cast<Eigen::Index>(s.alphabet_.size());
    if (s.transition_.rows() != k || s.transition_.cols() != k) {
        throw ValidationError("markov: transition matrix must be |alphabet| x |alphabet|");
    }
    if (stationary) {
        s.marginal_ = *stationary;
    } else {
        // Solve pi (P - I) = 0 with sum(pi) = 1.
        Matrix a = s.transition_.transpose() - Matrix::Identity(k, k);
        Eigen::FullPivLU<Matrix> lu(a);
        if (lu.rank() != k - 1) {
            throw ValidationError("markov: stationary vector is not unique; give \"stationary\" explicitly");
        }
        a.row(k - 1).setOnes();
        Vector rhs = Vector::Zero(k);
        rhs(k - 1) = 1.0;
        const Vector pi = a.fullPivLu().solve(rhs);
        s.marginal_.assign(pi.data(), pi.data() + k);
        for (double& v : s.marginal_) {
            if (v < 0.0 && v > -1e-14) {
                v = 0.0;
            }
        }
    }
    s.validate();

    s.reversed_ = Matrix::Zero(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        const double pa = s.marginal_[static_cast<std::size_t>(a)];
        if (pa <= 0.0) {
            continue;
        }
        for (Eigen::Index b = 0; b < k; ++b) {
            s.reversed_(a, b) = s.marginal_[static_cast<std::size_t>(b)] * s.transition_(b, a) / pa;
        }
    }
    return s;
}

void SymbolicSystem::validate() const
{
    if (alphabet_.empty()) {
        throw ValidationError("system: empty alphabet");
    }
    if (marginal_.size() != alphabet_.size()) {
        throw ValidationError("system: probability vector length differs from alphabet size");
    }
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
        for (std::size_t j = i + 1; j < alphabet_.size(); ++j) {
            if (alphabet_[i] == alphabet_[j]) {
                throw ValidationError("system: duplicate symbol '" + alphabet_[i] + "'");
            }
        }
    }
    check_distribution(marginal_, kind_ == Kind::markov ? "markov stationary vector" : "bernoulli");
    if (kind_ == Kind::markov) {
        for (Eigen::Index r = 0; r < transition_.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(transition_.cols()));
            for (Eigen::Index c = 0; c < transition_.cols(); ++c) {
                row[static_cast<std::size_t>(c)] = transition_(r, c);
            }
            check_distribution(row, "markov transition row " + std::to_string(r));
        }
        const Eigen::Map<const Eigen::RowVectorXd> pi(marginal_.data(), static_cast<Eigen::Index>(marginal_.size()));
        const double resid = (pi * transition_ - pi).cwiseAbs().maxCoeff();
        if (resid > kStationaryTol) {
            throw ValidationError("markov: stationary vector violates pi P = pi (residual " +
                                  std::to_string(resid) + ")");
        }
    }
}

SymbolicSystem SymbolicSystem::from_json(const json& j)
{
    if (!j.is_object()) {
        throw ValidationError("system: expected an object");
    }
    const std::string kind = j.value("kind", "");
    if (!j.contains("alphabet") || !j["alphabet"].is_array()) {
        throw ValidationError("system: missing \"alphabet\" array");
    }
    auto alphabet = j["alphabet"].get<std::vector<std::string>>();
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    if (kind == "bernoulli") {
        if (!j.contains("probs")) {
            throw ValidationError("system: bernoulli needs \"probs\"");
        }
        return bernoulli(std::move(alphabet), j["probs"].get<std::vector<double>>(), seed);
    }
    if (kind == "markov") {
        if (!j.contains("transition")) {
            throw ValidationError("system: markov needs \"transition\"");
        }
        const auto rows = j["transition"].get<std::vector<std::vector<double>>>();
        Matrix p(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size()) {
                throw ValidationError("system: ragged transition matrix");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
        }
        std::optional<std::vector<double>> stationary;
        if (j.contains("stationary")) {
            stationary = j["stationary"].get<std::vector<double>>();
        }
        return markov(std::move(alphabet), std::move(p), std::move(stationary), seed);
    }
    throw ValidationError("system: \"kind\" must be \"bernoulli\" or \"markov\"");
}

json SymbolicSystem::to_json() const
{
    json j;
    j["kind"] = kind_ == Kind::bernoulli ? "bernoulli" : "markov";
    j["alphabet"] = alphabet_;
    if (kind_ == Kind::bernoulli) {
        j["probs"] = marginal_;
    } else {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(transition_.rows()));
        for (Eigen::Index r = 0; r < transition_.rows(); ++r) {
            for (Eigen::Index c = 0; c < transition_.cols(); ++c) {
                rows[static_cast<std::size_t>(r)].push_back(transition_(r, c));
            }
        }
        j["transition"] = rows;
        j["stationary"] = marginal_;
    }
    j["seed"] = seed_;
    return j;
}

Symbol SymbolicSystem::symbol(const std::string& name) const
{
    const auto it = std::find(alphabet_.begin(), alphabet_.end(), name);
    if (it == alphabet_.end()) {
        throw ValidationError("unknown symbol '" + name + "'");
    }
    return static_cast<Symbol>(it - alphabet_.begin());
}

Symbol SymbolicSystem::draw_marginal(double u) const { return draw_from(marginal_.data(), size(), u); }

Symbol SymbolicSystem::draw_next(Symbol prev, double u) const
{
    if (kind_ == Kind::bernoulli) {
        return draw_marginal(u);
    }
    const Eigen::RowVectorXd row = transition_.row(prev);
    return draw_from(row.data(), size(), u);
}

Symbol SymbolicSystem::draw_prev(Symbol next, double u) const
{
    if (kind_ == Kind::bernoulli) {
        return draw_marginal(u);
    }
    if (marginal_[static_cast<std::size_t>(next)] <= 0.0) {
        throw std::domain_error("past of a null-stationary state '" + name(next) + "' is undefined");
    }
    const Eigen::RowVectorXd row = reversed_.row(next);
    return draw_from(row.data(), size(), u);
}

double SymbolicSystem::cylinder_measure(const std::vector<std::pair<long, Symbol>>& constraints) const
{
    if (constraints.empty()) {
        return 1.0;
    }
    auto sorted = constraints;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<long, Symbol>> uniq;
    for (const auto& c : sorted) {
        if (!uniq.empty() && uniq.back().first == c.first) {
            if (uniq.back().second != c.second) {
                return 0.0;
            }
            continue;
        }
        uniq.push_back(c);
    }
    double m = marginal_[static_cast<std::size_t>(uniq[0].second)];
    for (std::size_t i = 1; i < uniq.size(); ++i) {
        const auto s = static_cast<std::size_t>(uniq[i].second);
        if (kind_ == Kind::bernoulli) {
            m *= marginal_[s];
        } else {
            const Matrix pk = matrix_power(transition_, uniq[i].first - uniq[i - 1].first);
            m *= pk(uniq[i - 1].second, uniq[i].second);
        }
    }
    return m;
}

bool SymbolicSystem::word_possible(const std::vector<Symbol>& word) const
{
    if (word.empty()) {
        return true;
    }
    if (marginal_[static_cast<std::size_t>(word[0])] <= 0.0) {
        return false;
    }
    for (std::size_t i = 1; i < word.size(); ++i) {
        const double p = kind_ == Kind::bernoulli ? marginal_[static_cast<std::size_t>(word[i])]
                                                  : transition_(word[i - 1], word[i]);
        if (p <= 0.0) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// OrbitWindow

OrbitWindow::OrbitWindow(const SymbolicSystem& system, std::uint64_t seed)
    : system_(std::make_shared<const SymbolicSystem>(system)), seed_fwd_(seed), seed_bwd_(seed)
{
    fwd_.push_back(system_->draw_marginal(uniform_at(seed_fwd_, 0)));
}

OrbitWindow OrbitWindow::pinned(const SymbolicSystem& system, std::uint64_t seed, Symbol origin)
{
    if (origin < 0 || origin >= system.size()) {
        throw ValidationError("pinned origin symbol out of range");
    }
    OrbitWindow w(system, seed);
    w.fwd_[0] = origin;
    return w;
}

void OrbitWindow::throw_out_of_window(long i) const
{
    std::ostringstream msg;
    msg << "coordinate " << i << " outside materialized window [" << i_min() << ", " << i_max() << "]";
    throw WindowTooSmall(msg.str());
}

Symbol OrbitWindow::generate(long raw, Symbol neighbour) const
{
    if (raw >= anchor_) {
        return system_->draw_next(neighbour, uniform_at(seed_fwd_, raw));
    }
    return system_->draw_prev(neighbour, uniform_at(seed_bwd_, raw));
}

void OrbitWindow::extend(long lo, long hi)
{
    const long raw_hi = hi + offset_;
    const long raw_lo = lo + offset_;
    if (raw_hi >= anchor_) {
        const auto need = static_cast<std::size_t>(raw_hi - anchor_ + 1);
        if (need > fwd_.size()) {
            fwd_.reserve(need);
            while (fwd_.size() < need) {
                const long raw = anchor_ + static_cast<long>(fwd_.size());
                fwd_.push_back(generate(raw, fwd_.back()));
            }
        }
    }
    if (raw_lo < anchor_) {
        const auto need = static_cast<std::size_t>(anchor_ - raw_lo);
        if (need > bwd_.size()) {
            bwd_.reserve(need);
            while (bwd_.size() < need) {
                const long raw = anchor_ - 1 - static_cast<long>(bwd_.size());
                const Symbol neighbour = bwd_.empty() ? fwd_.front() : bwd_.back();
                bwd_.push_back(generate(raw, neighbour));
            }
        }
    }
}

OrbitWindow OrbitWindow::shifted(long n) const
{
    OrbitWindow out = *this;
    out.offset_ += n;
    return out;
}

OrbitWindow OrbitWindow::with_resampled_past(long boundary, std::uint64_t past_seed) const
{
    OrbitWindow src = *this;
    // The copied future must reach the original anchor so that later forward
    // extension follows the original rule.
    const long hi = std::max(std::max(boundary, i_max()), anchor_ - offset_);
    src.extend(boundary, hi);

    OrbitWindow out = src;
    out.anchor_ = boundary + src.offset_;
    out.seed_bwd_ = past_seed;
    out.fwd_.clear();
    out.bwd_.clear();
    for (long i = boundary; i <= src.i_max(); ++i) {
        out.fwd_.push_back(src.at(i));
    }
    return out;
}

OrbitWindow sample_orbit(const SymbolicSystem& system, std::uint64_t seed, long i_min, long i_max)
{
    if (i_min > i_max) {
        throw ValidationError("sample_orbit: i_min > i_max");
    }
    OrbitWindow w(system, seed);
    w.extend(i_min, i_max);
    return w;
}

// ---------------------------------------------------------------------------
// Indicator / Observable

Indicator::Indicator(long lo, long hi, Predicate pred, std::string name)
    : lo_(lo), hi_(hi), pred_(std::move(pred)), name_(std::move(name))
{
    if (lo_ > hi_) {
        throw ValidationError("indicator window lo > hi");
    }
}

Indicator Indicator::always()
{
    Indicator ind(0, 0, [](const OrbitWindow&, long) { return true; }, "true");
    ind.always_ = true;
    ind.cylinder_ = std::vector<std::pair<long, Symbol>>{};
    return ind;
}

Indicator Indicator::cylinder(std::vector<std::pair<long, Symbol>> constraints)
{
    if (constraints.empty()) {
        return always();
    }
    long lo = constraints.front().first;
    long hi = lo;
    for (const auto& [i, s] : constraints) {
        lo = std::min(lo, i);
        hi = std::max(hi, i);
    }
    std::ostringstream name;
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        name << (k ? "," : "") << "x_" << constraints[k].first << "=" << constraints[k].second;
    }
    auto pred = [constraints](const OrbitWindow& x, long k) {
        for (const auto& [i, s] : constraints) {
            if (x.at(k + i) != s) {
                return false;
            }
        }
        return true;
    };
    Indicator ind(lo, hi, std::move(pred), name.str());
    ind.cylinder_ = std::move(constraints);
    return ind;
}

Indicator Indicator::from_json(const json& j, const SymbolicSystem& system)
{
    if (!j.is_object()) {
        throw ValidationError("indicator: expected an object {\"<index>\": \"<symbol>\"}");
    }
    std::vector<std::pair<long, Symbol>> constraints;
    for (const auto& [key, value] : j.items()) {
        long index = 0;
        try {
            std::size_t used = 0;
            index = std::stol(key, &used);
            if (used != key.size()) {
                throw std::invalid_argument(key);
            }
        } catch (const std::exception&) {
            throw ValidationError("indicator: key '" + key + "' is not an integer index");
        }
        constraints.emplace_back(index, system.symbol(value.get<std::string>()));
    }
    return cylinder(std::move(constraints));
}

std::optional<double> Indicator::exact_measure(const SymbolicSystem& system) const
{
    if (!cylinder_) {
        return std::nullopt;
    }
    return system.cylinder_measure(*cylinder_);
}

Observable Observable::constant(double c)
{
    return Observable{0, 0, [c](const OrbitWindow&, long) { return c; }};
}

Observable Observable::symbol_weights(long index, std::vector<double> weight_by_symbol)
{
    return Observable{index, index, [index, w = std::move(weight_by_symbol)](const OrbitWindow& x, long k) {
                          return w.at(static_cast<std::size_t>(x.at(k + index)));
                      }};
}

// ---------------------------------------------------------------------------
// first return / induced systems

long first_return(const Indicator& indicator, OrbitWindow& x, long start, long return_cap)
{
    x.extend(start + indicator.lo(), start + indicator.hi());
    if (!indicator(x, start)) {
        throw std::invalid_argument("first_return: starting point is not in the induced set");
    }
    long chunk = 64;
    for (long n = 1; n <= return_cap; ++n) {
        if (!x.covers(start + n + indicator.lo(), start + n + indicator.hi())) {
            x.extend(start + n + indicator.lo(), start + n + indicator.hi() + chunk);
            chunk = std::min<long>(chunk * 2, 1 << 20);
        }
        if (indicator(x, start + n)) {
            return n;
        }
    }
    throw ReturnCapExceeded("no return to '" + indicator.name() + "' within " + std::to_string(return_cap) +
                            " steps");
}

InducedSystem::InducedSystem(SymbolicSystem base, Indicator indicator, long return_cap, MeanEstimate mass)
    : base_(std::move(base)), indicator_(std::move(indicator)), return_cap_(return_cap), mass_(mass)
{
}

OrbitWindow InducedSystem::sample_point(std::uint64_t seed) const
{
    constexpr long kMaxCandidates = 1'000'000;
    for (long j = 0; j < kMaxCandidates; ++j) {
        OrbitWindow x(base_, j == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(j)));
        x.extend(indicator_.lo(), indicator_.hi());
        if (indicator_(x, 0)) {
            return x;
        }
    }
    throw EmptyIndicator("rejection sampling found no point of '" + indicator_.name() + "'");
}

std::vector<long> InducedSystem::return_times(OrbitWindow& x, long count) const
{
    std::vector<long> times;
    times.reserve(static_cast<std::size_t>(count));
    long k = 0;
    for (long c = 0; c < count; ++c) {
        const long n = first_return(indicator_, x, k, return_cap_);
        times.push_back(n);
        k += n;
    }
    return times;
}

MeanEstimate InducedSystem::mean_return(long ensemble, std::uint64_t seed) const
{
    const auto n = parallel_map<long>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x = sample_point(derive_seed(seed, i));
        return first_return(indicator_, x, 0, return_cap_);
    });
    RunningStats st;
    for (long v : n) {
        st.add(static_cast<double>(v));
    }
    return {st.mean(), st.stderr_mean(), st.count()};
}

InducedSystem induce(const SymbolicSystem& system, const Indicator& indicator, long ensemble, std::uint64_t seed,
                     long return_cap)
{
    if (ensemble < 1) {
        throw ValidationError("induce: ensemble must be >= 1");
    }
    long hits = 0;
    for (long i = 0; i < ensemble; ++i) {
        OrbitWindow x(system, derive_seed(seed, static_cast<std::uint64_t>(i)));
        x.extend(indicator.lo(), indicator.hi());
        hits += indicator(x, 0) ? 1 : 0;
    }
    if (hits == 0) {
        throw EmptyIndicator("no sampled point satisfies '" + indicator.name() + "'");
    }
    const double p = static_cast<double>(hits) / static_cast<double>(ensemble);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(ensemble));
    return InducedSystem(system, indicator, return_cap, MeanEstimate{p, se, ensemble});
}

KacCheck kac_check(const InducedSystem& induced, const MeanEstimate& returns)
{
    KacCheck k;
    const double m = induced.measured_mass();
    k.product = m * returns.mean;
    k.sigma = std::hypot(induced.mass_stderr() * returns.mean, m * returns.stderr_);
    k.z = z_score(k.product, 1.0, k.sigma);
    return k;
}

// ---------------------------------------------------------------------------
// Birkhoff sums

BirkhoffStats birkhoff(const SymbolicSystem& system, const Observable& h, long n, long ensemble, std::uint64_t seed)
{
    if (n < 1 || ensemble < 1) {
        throw ValidationError("birkhoff: n and ensemble must be >= 1");
    }
    struct Member {
        double mean;
        bool dipped;
        bool final_positive;
    };
    const auto members = parallel_map<Member>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        OrbitWindow x(system, derive_seed(seed, i));
        x.extend(h.lo, n - 1 + h.hi);
        CompensatedSum sum;
        bool dipped = false;
        for (long k = 0; k < n; ++k) {
            sum.add(h.fn(x, k));
            dipped = dipped || sum.value() < 0.0;
        }
        return Member{sum.value() / static_cast<double>(n), dipped, sum.value() > 0.0};
    });

    BirkhoffStats out;
    RunningStats st;
    long dipped = 0;
    long positive = 0;
    for (const auto& m : members) {
        st.add(m.mean);
        out.member_means.push_back(m.mean);
        dipped += m.dipped ? 1 : 0;
        positive += m.final_positive ? 1 : 0;
    }
    out.mean = st.mean();
    out.stderr_ = st.stderr_mean();
    out.fraction_dipped = static_cast<double>(dipped) / static_cast<double>(ensemble);
    out.fraction_final_positive = static_cast<double>(positive) / static_cast<double>(ensemble);
    return out;
}

} // namespace cocyclab
