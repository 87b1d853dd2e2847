#include "cocyclab/cocycle.hpp"

#include "cocyclab/errors.hpp"
#include "cocyclab/json_io.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stats.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cocyclab {

namespace {

std::string word_key(const SymbolicSystem& system, const std::vector<Symbol>& word)
{
    std::string key;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (i) {
            key += ',';
        }
        key += system.name(word[i]);
    }
    return key;
}

// Words of length `len` in mixed-radix order (first letter most significant).
std::vector<std::vector<Symbol>> all_words(int alphabet, long len)
{
    std::vector<std::vector<Symbol>> out;
    std::vector<Symbol> w(static_cast<std::size_t>(len), 0);
    for (;;) {
        out.push_back(w);
        long i = len - 1;
        while (i >= 0 && w[static_cast<std::size_t>(i)] == alphabet - 1) {
            w[static_cast<std::size_t>(i)] = 0;
            --i;
        }
        if (i < 0) {
            return out;
        }
        ++w[static_cast<std::size_t>(i)];
    }
}

void require_window(const OrbitWindow& x, long lo, long hi, const char* what)
{
    if (!x.covers(lo, hi)) {
        std::ostringstream msg;
        msg << what << " needs coordinates [" << lo << ", " << hi << "] but the window is [" << x.i_min() << ", "
            << x.i_max() << "]";
        throw WindowTooSmall(msg.str());
    }
}

} // namespace

void validate_sl(const Matrix& m, const std::string& what)
{
    if (m.rows() != m.cols() || m.rows() < 2) {
        throw ValidationError(what + ": expected a square matrix of size >= 2");
    }
    if (!m.allFinite()) {
        throw ValidationError(what + ": non-finite entry");
    }
    const double det = m.determinant();
    if (std::abs(det - 1.0) > kDetTolerance) {
        std::ostringstream msg;
        msg << what << ": determinant " << det << " is not 1 (SL_d required)";
        throw ValidationError(msg.str());
    }
}

// ---------------------------------------------------------------------------
// CocycleSpec

CocycleSpec::CocycleSpec(int dim, long lo, long hi, int alphabet_size, std::vector<Matrix> table)
    : dim_(dim), lo_(lo), hi_(hi), alphabet_size_(alphabet_size), table_(std::move(table))
{
    if (lo_ > hi_) {
        throw ValidationError("cocycle: window lo > hi");
    }
    std::size_t expected = 1;
    for (long i = lo_; i <= hi_; ++i) {
        expected *= static_cast<std::size_t>(alphabet_size_);
    }
    if (table_.size() != expected) {
        throw ValidationError("cocycle: table must have one entry per window word");
    }
    inverses_.reserve(table_.size());
    for (std::size_t c = 0; c < table_.size(); ++c) {
        if (table_[c].rows() != dim_ || table_[c].cols() != dim_) {
            throw ValidationError("cocycle: table entry has wrong dimension");
        }
        validate_sl(table_[c], "cocycle table entry " + std::to_string(c));
        inverses_.push_back(table_[c].inverse());
    }
}

CocycleSpec CocycleSpec::from_table(const SymbolicSystem& system, long lo, long hi,
                                    const std::map<std::string, Matrix>& table)
{
    if (table.empty()) {
        throw ValidationError("cocycle: empty table");
    }
    const int d = static_cast<int>(table.begin()->second.rows());
    const auto words = all_words(system.size(), hi - lo + 1);
    std::vector<Matrix> entries;
    entries.reserve(words.size());
    std::size_t used = 0;
    for (const auto& w : words) {
        const auto key = word_key(system, w);
        const auto it = table.find(key);
        if (it != table.end()) {
            validate_sl(it->second, "cocycle entry '" + key + "'");
            entries.push_back(it->second);
            ++used;
        } else if (system.word_possible(w)) {
            throw ValidationError("cocycle: table has no entry for reachable window '" + key + "'");
        } else {
            entries.push_back(Matrix::Identity(d, d)); // unreachable word
        }
    }
    if (used != table.size()) {
        throw ValidationError("cocycle: table has keys that are not words over the alphabet");
    }
    return CocycleSpec(d, lo, hi, system.size(), std::move(entries));
}

CocycleSpec CocycleSpec::from_json(const json& j, const SymbolicSystem& system)
{
    if (!j.is_object() || !j.contains("table") || !j["table"].is_object()) {
        throw ValidationError("cocycle: expected {\"d\", \"window\", \"table\"}");
    }
    long lo = 1;
    long hi = 1;
    if (j.contains("window")) {
        const auto w = j["window"].get<std::vector<long>>();
        if (w.size() != 2) {
            throw ValidationError("cocycle: window must be [lo, hi]");
        }
        lo = w[0];
        hi = w[1];
    }
    std::map<std::string, Matrix> table;
    for (const auto& [key, value] : j["table"].items()) {
        table.emplace(key, matrix_from_json(value));
    }
    auto spec = from_table(system, lo, hi, table);
    if (j.contains("d") && j["d"].get<int>() != spec.dim()) {
        throw ValidationError("cocycle: \"d\" does not match table matrices");
    }
    return spec;
}

json CocycleSpec::to_json(const SymbolicSystem& system) const
{
    json j;
    j["d"] = dim_;
    j["window"] = {lo_, hi_};
    json table = json::object();
    const auto words = all_words(alphabet_size_, hi_ - lo_ + 1);
    for (std::size_t c = 0; c < words.size(); ++c) {
        if (system.word_possible(words[c])) {
            table[word_key(system, words[c])] = matrix_to_json(table_[c]);
        }
    }
    j["table"] = table;
    return j;
}

std::pair<long, long> CocycleSpec::coordinates_for(long n) const
{
    if (n >= 1) {
        return {lo_, n - 1 + hi_};
    }
    if (n < 0) {
        return {n + lo_, hi_ - 1};
    }
    return {0, 0};
}

bool CocycleSpec::is_random_walk(const SymbolicSystem& system) const { return system.is_iid() && lo_ == hi_; }

std::vector<double> CocycleSpec::step_law(const SymbolicSystem& system) const
{
    if (!is_random_walk(system)) {
        throw std::invalid_argument("step law requires an i.i.d. single-coordinate cocycle");
    }
    return system.marginal();
}

// ---------------------------------------------------------------------------
// evaluation

ScaledMatrix evaluate(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    const int d = c.dim();
    ScaledMatrix acc{Matrix::Identity(d, d), 0};
    if (n == 0) {
        return acc;
    }
    const auto [lo, hi] = c.coordinates_for(n);
    require_window(x, lo, hi, "evaluate");
    Matrix scratch(d, d);
    if (n > 0) {
        for (long k = 0; k < n; ++k) {
            multiply_left_rescaled(c.generator(x, k), acc, scratch);
        }
    } else {
        for (long k = -1; k >= n; --k) {
            multiply_left_rescaled(c.inverse(x, k), acc, scratch);
        }
    }
    return acc;
}

Matrix evaluate_naive(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    const int d = c.dim();
    Matrix acc = Matrix::Identity(d, d);
    if (n == 0) {
        return acc;
    }
    const auto [lo, hi] = c.coordinates_for(n);
    require_window(x, lo, hi, "evaluate_naive");
    if (n > 0) {
        for (long k = 0; k < n; ++k) {
            acc = c.generator(x, k) * acc;
        }
    } else {
        for (long k = -1; k >= n; --k) {
            acc = c.inverse(x, k) * acc;
        }
    }
    return acc;
}

ScaledMatrix GradedProduct::assemble() const
{
    const double shift = log_diag.size() ? log_diag.maxCoeff() : 0.0;
    const long e = static_cast<long>(std::floor(shift / std::log(2.0)));
    const double residual = shift - static_cast<double>(e) * std::log(2.0);
    Vector scale = (log_diag.array() - shift + residual).exp();
    ScaledMatrix out;
    out.m = q * scale.asDiagonal() * unit_upper;
    out.exp2 = e;
    return out;
}

GradedProduct evaluate_graded(const CocycleSpec& c, const OrbitWindow& x, long n)
{
    if (n < 0) {
        throw std::invalid_argument("evaluate_graded: n must be >= 0");
    }
    const int d = c.dim();
    GradedProduct g{Matrix::Identity(d, d), Vector::Zero(d), Matrix::Identity(d, d)};
    if (n == 0) {
        return g;
    }
    const auto [lo, hi] = c.coordinates_for(n);
    require_window(x, lo, hi, "evaluate_graded");
    Matrix y(d, d);
    Matrix r(d, d);
    Matrix conj(d, d);
    for (long k = 0; k < n; ++k) {
        y.noalias() = c.generator(x, k) * g.q;
        if (!orthonormalize(y, r)) {
            throw NumericalBreakdown("graded product: QR step collapsed at k = " + std::to_string(k));
        }
        g.q.swap(y);
        // R' D U = D' D (D^{-1} U' D) U with R' = D' U'.
        conj.setIdentity();
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                const double u = r(i, j) / r(i, i);
                conj(i, j) = u == 0.0 ? 0.0 : u * std::exp(g.log_diag(j) - g.log_diag(i));
            }
        }
        for (int i = 0; i < d; ++i) {
            g.log_diag(i) += std::log(r(i, i));
        }
        g.unit_upper = conj * g.unit_upper;
    }
    return g;
}

IntegrabilityEstimate integrability(const CocycleSpec& c, const SymbolicSystem& system, long ensemble,
                                    std::uint64_t seed)
{
    if (ensemble < 1) {
        throw ValidationError("integrability: ensemble must be >= 1");
    }
    RunningStats st;
    for (long i = 0; i < ensemble; ++i) {
        OrbitWindow x(system, derive_seed(seed, static_cast<std::uint64_t>(i)));
        x.extend(c.lo(), c.hi());
        st.add(std::log(operator_norm(c.generator(x, 0))));
    }
    return {st.mean(), st.stderr_mean(), ensemble};
}

// ---------------------------------------------------------------------------
// skew products

SkewSystem::SkewSystem(const SymbolicSystem& base, long window, int z_size, std::vector<std::vector<int>> perms,
                       std::vector<double> zeta)
    : base_(base), window_(window), z_size_(z_size), perms_(std::move(perms)), zeta_(std::move(zeta))
{
    if (z_size_ < 1) {
        throw ValidationError("skew: z_size must be >= 1");
    }
    if (static_cast<int>(perms_.size()) != base_.size()) {
        throw ValidationError("skew: one permutation per symbol required");
    }
    if (zeta_.empty()) {
        zeta_.assign(static_cast<std::size_t>(z_size_), 1.0 / z_size_);
    }
    if (static_cast<int>(zeta_.size()) != z_size_) {
        throw ValidationError("skew: zeta has wrong length");
    }
    double total = 0.0;
    for (double v : zeta_) {
        if (!(v >= 0.0)) {
            throw ValidationError("skew: zeta must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ValidationError("skew: zeta must sum to 1");
    }
    for (std::size_t s = 0; s < perms_.size(); ++s) {
        const auto& p = perms_[s];
        if (static_cast<int>(p.size()) != z_size_) {
            throw ValidationError("skew: permutation for '" + base_.name(static_cast<Symbol>(s)) + "' has wrong length");
        }
        std::vector<bool> seen(static_cast<std::size_t>(z_size_), false);
        for (int v : p) {
            if (v < 0 || v >= z_size_ || seen[static_cast<std::size_t>(v)]) {
                throw ValidationError("skew: action of '" + base_.name(static_cast<Symbol>(s)) + "' is not a bijection");
            }
            seen[static_cast<std::size_t>(v)] = true;
        }
        for (int z = 0; z < z_size_; ++z) {
            if (zeta_[static_cast<std::size_t>(p[static_cast<std::size_t>(z)])] != zeta_[static_cast<std::size_t>(z)]) {
                throw ValidationError("skew: zeta is not invariant under '" + base_.name(static_cast<Symbol>(s)) + "'");
            }
        }
    }
}

SkewSystem SkewSystem::from_json(const json& j, const SymbolicSystem& base)
{
    if (!j.is_object() || !j.contains("z_size") || !j.contains("perms")) {
        throw ValidationError("skew: expected {\"z_size\", \"perms\"}");
    }
    long window = 1;
    if (j.contains("window")) {
        const auto w = j["window"].get<std::vector<long>>();
        if (w.size() != 2 || w[0] != w[1]) {
            throw ValidationError("skew: the generator window must be a single coordinate [i, i]");
        }
        window = w[0];
    }
    const int z_size = j["z_size"].get<int>();
    std::vector<std::vector<int>> perms(static_cast<std::size_t>(base.size()));
    std::vector<bool> given(static_cast<std::size_t>(base.size()), false);
    for (const auto& [key, value] : j["perms"].items()) {
        const Symbol s = base.symbol(key);
        perms[static_cast<std::size_t>(s)] = value.get<std::vector<int>>();
        given[static_cast<std::size_t>(s)] = true;
    }
    for (int s = 0; s < base.size(); ++s) {
        if (!given[static_cast<std::size_t>(s)]) {
            if (base.marginal()[static_cast<std::size_t>(s)] > 0.0) {
                throw ValidationError("skew: no permutation for symbol '" + base.name(s) + "'");
            }
            perms[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(z_size));
            std::iota(perms[static_cast<std::size_t>(s)].begin(), perms[static_cast<std::size_t>(s)].end(), 0);
        }
    }
    std::vector<double> zeta;
    if (j.contains("zeta")) {
        zeta = j["zeta"].get<std::vector<double>>();
    }
    SkewSystem s(base, window, z_size, std::move(perms), std::move(zeta));

    if (j.contains("rho")) {
        std::vector<Matrix> rho(static_cast<std::size_t>(base.size() * z_size));
        std::vector<bool> have(static_cast<std::size_t>(base.size()), false);
        for (const auto& [key, value] : j["rho"].items()) {
            const Symbol sym = base.symbol(key);
            if (!value.is_array() || static_cast<int>(value.size()) != z_size) {
                throw ValidationError("skew: rho['" + key + "'] needs one matrix per z");
            }
            for (int z = 0; z < z_size; ++z) {
                rho[static_cast<std::size_t>(sym * z_size + z)] = matrix_from_json(value[static_cast<std::size_t>(z)]);
            }
            have[static_cast<std::size_t>(sym)] = true;
        }
        int d = 0;
        for (int sym = 0; sym < base.size(); ++sym) {
            if (have[static_cast<std::size_t>(sym)]) {
                d = static_cast<int>(rho[static_cast<std::size_t>(sym * z_size)].rows());
            }
        }
        for (int sym = 0; sym < base.size(); ++sym) {
            if (!have[static_cast<std::size_t>(sym)]) {
                if (base.marginal()[static_cast<std::size_t>(sym)] > 0.0) {
                    throw ValidationError("skew: rho has no entry for symbol '" + base.name(sym) + "'");
                }
                for (int z = 0; z < z_size; ++z) {
                    rho[static_cast<std::size_t>(sym * z_size + z)] = Matrix::Identity(d, d);
                }
            }
        }
        s.set_rho(std::move(rho));
    }
    return s;
}

void SkewSystem::set_rho(std::vector<Matrix> rho_by_symbol_then_z)
{
    if (rho_by_symbol_then_z.size() != static_cast<std::size_t>(base_.size() * z_size_)) {
        throw ValidationError("skew: rho table has wrong size");
    }
    const auto d = rho_by_symbol_then_z.front().rows();
    for (std::size_t i = 0; i < rho_by_symbol_then_z.size(); ++i) {
        if (rho_by_symbol_then_z[i].rows() != d) {
            throw ValidationError("skew: rho matrices have mixed dimensions");
        }
        validate_sl(rho_by_symbol_then_z[i], "skew rho entry " + std::to_string(i));
    }
    rho_ = std::move(rho_by_symbol_then_z);
}

Matrix SkewSystem::z_transition() const
{
    if (!base_.is_iid()) {
        throw std::invalid_argument("z_transition: the z-process is Markov only over a Bernoulli base");
    }
    Matrix p = Matrix::Zero(z_size_, z_size_);
    for (int s = 0; s < base_.size(); ++s) {
        const double w = base_.marginal()[static_cast<std::size_t>(s)];
        for (int z = 0; z < z_size_; ++z) {
            p(z, perms_[static_cast<std::size_t>(s)][static_cast<std::size_t>(z)]) += w;
        }
    }
    return p;
}

std::vector<int> skew_orbit(const SkewSystem& s, OrbitWindow& x, int z0, long n)
{
    if (z0 < 0 || z0 >= s.z_size()) {
        throw ValidationError("skew_orbit: z0 outside Z");
    }
    if (n > 0) {
        x.extend(s.window(), n - 1 + s.window());
    }
    std::vector<int> traj;
    traj.reserve(static_cast<std::size_t>(n + 1));
    traj.push_back(z0);
    int z = z0;
    for (long k = 0; k < n; ++k) {
        z = s.step(x, k, z);
        traj.push_back(z);
    }
    return traj;
}

SkewObservable SkewObservable::from_json(const json& j, const SymbolicSystem& system)
{
    SkewObservable o;
    std::ostringstream name;
    if (j.contains("x")) {
        for (const auto& [key, value] : j["x"].items()) {
            const long index = std::stol(key);
            const auto sym = value.get<std::string>();
            o.x_constraints.emplace_back(index, system.symbol(sym));
            name << "x_" << index << "=" << sym << ";";
        }
    }
    if (j.contains("z")) {
        o.z_state = j["z"].get<int>();
        name << "z=" << o.z_state;
    }
    o.name = name.str();
    return o;
}

SkewErgodicityReport skew_ergodicity_test(const SkewSystem& s, const std::vector<SkewObservable>& observables,
                                          long n, long ensemble, std::uint64_t seed, int z0)
{
    if (n < 1 || ensemble < 2) {
        throw ValidationError("skew_ergodicity_test: n >= 1 and ensemble >= 2 required");
    }
    if (z0 < 0 || z0 >= s.z_size()) {
        throw ValidationError("skew_ergodicity_test: z0 outside Z");
    }
    long lo = s.window();
    long hi = s.window();
    for (const auto& o : observables) {
        if (o.z_state >= s.z_size()) {
            throw ValidationError("skew observable refers to a z outside Z");
        }
        for (const auto& [i, sym] : o.x_constraints) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    const std::size_t m = observables.size();
    const auto per_member = parallel_map<std::vector<double>>(static_cast<std::size_t>(ensemble), [&](std::size_t i) {
        const std::uint64_t member_seed = derive_seed(seed, i);
        OrbitWindow x(s.base(), member_seed);
        x.extend(lo, n - 1 + hi);
        int z = z0;
        std::vector<long> hits(m, 0);
        for (long k = 0; k < n; ++k) {
            for (std::size_t o = 0; o < m; ++o) {
                const auto& obs = observables[o];
                bool in = obs.z_state < 0 || obs.z_state == z;
                for (const auto& [idx, sym] : obs.x_constraints) {
                    in = in && x.at(k + idx) == sym;
                }
                hits[o] += in ? 1 : 0;
            }
            z = s.step(x, k, z);
        }
        std::vector<double> avg(m);
        for (std::size_t o = 0; o < m; ++o) {
            avg[o] = static_cast<double>(hits[o]) / static_cast<double>(n);
        }
        return avg;
    });

    SkewErgodicityReport report;
    report.n = n;
    report.ensemble = ensemble;
    for (std::size_t o = 0; o < m; ++o) {
        RunningStats st;
        for (const auto& v : per_member) {
            st.add(v[o]);
        }
        SkewObservableResult r;
        r.name = observables[o].name;
        r.birkhoff_mean = st.mean();
        r.stderr_ = st.stderr_mean();
        const double zeta = observables[o].z_state < 0 ? 1.0 : s.zeta()[static_cast<std::size_t>(observables[o].z_state)];
        r.space_average = s.base().cylinder_measure(observables[o].x_constraints) * zeta;
        r.z = z_score(r.birkhoff_mean, r.space_average, r.stderr_);
        report.max_z = std::max(report.max_z, r.z);
        report.observables.push_back(r);
    }
    return report;
}

} // namespace cocyclab
