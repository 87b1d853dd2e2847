#include "cocyclab/experiment.hpp"

#include "cocyclab/cocycle.hpp"
#include "cocyclab/dynamics.hpp"
#include "cocyclab/errors.hpp"
#include "cocyclab/fgboundary.hpp"
#include "cocyclab/flagspace.hpp"
#include "cocyclab/json_io.hpp"
#include "cocyclab/oseledets.hpp"
#include "cocyclab/parallel.hpp"
#include "cocyclab/random.hpp"
#include "cocyclab/stationary.hpp"
#include "cocyclab/stats.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace cocyclab {

namespace {

using nlohmann::json;

// Sub-streams of the run seed.
constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL;
constexpr std::uint64_t kFlagStream = 0x666c6167ULL;
constexpr std::uint64_t kSpectrumStream = 0x73706563ULL;
constexpr std::uint64_t kFrameStream = 0x6672616dULL;
constexpr std::uint64_t kContractionStream = 0x636f6e74ULL;
constexpr std::uint64_t kHarmonicStream = 0x6861726dULL;
constexpr std::uint64_t kGrowthStream = 0x67726f77ULL;

// Diameter and flag-match threshold of the contraction summary.
constexpr double kContractionTolerance = 0.01;

std::string num(double v) { return json(v).dump(); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) {
        throw ValidationError(where + ": expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (allowed.count(key) == 0) {
            throw ValidationError(where + ": unknown key \"" + key + "\"");
        }
    }
}

long get_long(const json& j, const std::string& key, long fallback, long min_value, const std::string& where)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j[key].is_number_integer()) {
        throw ValidationError(where + ": \"" + key + "\" must be an integer");
    }
    const long v = j[key].get<long>();
    if (v < min_value) {
        throw ValidationError(where + ": \"" + key + "\" must be >= " + std::to_string(min_value));
    }
    return v;
}

double get_double(const json& j, const std::string& key, double fallback, const std::string& where)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j[key].is_number()) {
        throw ValidationError(where + ": \"" + key + "\" must be a number");
    }
    return j[key].get<double>();
}

bool get_bool(const json& j, const std::string& key, bool fallback, const std::string& where)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j[key].is_boolean()) {
        throw ValidationError(where + ": \"" + key + "\" must be true or false");
    }
    return j[key].get<bool>();
}

std::vector<long> get_long_list(const json& j, const std::string& key, std::vector<long> fallback,
                                const std::string& where)
{
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j[key].is_array() || j[key].empty()) {
        throw ValidationError(where + ": \"" + key + "\" must be a non-empty integer array");
    }
    std::vector<long> out;
    for (const auto& v : j[key]) {
        if (!v.is_number_integer()) {
            throw ValidationError(where + ": \"" + key + "\" must be a non-empty integer array");
        }
        out.push_back(v.get<long>());
    }
    return out;
}

const json& require(const json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key)) {
        throw ValidationError(where + ": missing \"" + key + "\"");
    }
    return j.at(key);
}

struct Context {
    json config;
    json params;
    std::uint64_t seed = 0;
    std::optional<long> ensemble;
};

long ensemble_param(const Context& ctx, long fallback, long min_value = 2)
{
    if (ctx.ensemble) {
        if (*ctx.ensemble < min_value) {
            throw ValidationError("--ensemble must be >= " + std::to_string(min_value));
        }
        return *ctx.ensemble;
    }
    return get_long(ctx.params, "ensemble", fallback, min_value, "params");
}

json flag_json(const Flag& f) { return f.to_json(); }

json spectrum_comparison(double estimate, double estimate_stderr, double target, double target_stderr,
                         double multiplier)
{
    const double diff = std::abs(estimate - target);
    const double tol = multiplier * (estimate_stderr + target_stderr) + kGateFloor;
    return {{"difference", diff}, {"tolerance", tol}, {"agrees", diff <= tol}};
}

// ---------------------------------------------------------------------------

ExperimentResult run_spectrum(const Context& ctx)
{
    check_keys(ctx.params, {"n", "ensemble", "seed", "oracle", "flags", "flags_n"}, "params");
    const auto system = SymbolicSystem::from_json(require(ctx.config, "system", "config"));
    const auto cocycle = CocycleSpec::from_json(require(ctx.config, "cocycle", "config"), system);
    const long n = get_long(ctx.params, "n", 10000, 100, "params");
    const long ensemble = ensemble_param(ctx, 32);

    const Spectrum spec = lyapunov_spectrum(cocycle, system, n, ensemble, ctx.seed);

    ExperimentResult r;
    r.summary["spectrum"] = spec.to_json();
    r.summary["trace"] = {
        {"value", spec.trace()}, {"stderr", spec.trace_stderr()}, {"tolerance", spec.trace_tolerance()}};
    if (get_bool(ctx.params, "oracle", true, "params")) {
        const NormGrowth ng = norm_growth_oracle(cocycle, system, n, ensemble, derive_seed(ctx.seed, kOracleStream));
        json o = {{"estimate", ng.estimate}, {"stderr", ng.stderr_}};
        o.update(spectrum_comparison(spec.exponents[0], spec.stderrs[0], ng.estimate, ng.stderr_, 2.0));
        r.summary["norm_growth_oracle"] = o;
    }
    if (get_bool(ctx.params, "flags", false, "params")) {
        const long flags_n = get_long(ctx.params, "flags_n", 400, 1, "params");
        const OrbitWindow x(system, derive_seed(ctx.seed, kFlagStream));
        const OseledetsFlags f = oseledets_flags(cocycle, x, flags_n);
        r.summary["flags"] = {{"n", flags_n},
                              {"psi_minus", flag_json(f.psi_minus)},
                              {"psi_plus", flag_json(f.psi_plus)},
                              {"transversality", f.transversality}};
    }

    std::ostringstream csv;
    spec.write_csv(csv);
    r.samples_csv = csv.str();

    std::ostringstream h;
    h << "spectrum: lambda = (";
    for (std::size_t i = 0; i < spec.exponents.size(); ++i) {
        h << (i ? ", " : "") << num(spec.exponents[i]) << " +- " << num(spec.stderrs[i]);
    }
    h << "), " << to_string(spec.classification);
    r.headline = h.str();
    return r;
}

// ---------------------------------------------------------------------------

Matrix subspace_from_json(const json& j)
{
    if (!j.is_array() || j.empty()) {
        throw ValidationError("properness: each subspace is a non-empty list of spanning vectors");
    }
    const Matrix rows = matrix_from_json(j);
    return rows.transpose();
}

ExperimentResult run_stationary(const Context& ctx)
{
    check_keys(ctx.params,
               {"burn", "samples", "seed", "ensemble", "spectrum", "properness", "contraction", "harmonic", "growth"},
               "params");
    const auto system = SymbolicSystem::from_json(require(ctx.config, "system", "config"));
    const auto cocycle = CocycleSpec::from_json(require(ctx.config, "cocycle", "config"), system);
    const long burn = get_long(ctx.params, "burn", 200, 10, "params");
    const long samples = get_long(ctx.params, "samples", 2000, 2, "params");
    const int d = cocycle.dim();

    const StationaryEstimate est = estimate_stationary(cocycle, system, burn, samples, ctx.seed);
    ExperimentResult r;
    r.summary["measure"] = {{"atoms", est.measure.atoms().size()},
                            {"sample_count", est.measure.sample_count()},
                            {"max_weight", est.measure.max_weight()},
                            {"burn", burn}};
    r.summary["refresh"] = {{"z", est.refresh.z}, {"max_z", est.refresh.max_z}};

    std::optional<Spectrum> spec;
    if (ctx.params.contains("spectrum")) {
        const json& p = ctx.params["spectrum"];
        check_keys(p, {"n", "ensemble"}, "params.spectrum");
        spec = lyapunov_spectrum(cocycle, system, get_long(p, "n", 20000, 100, "params.spectrum"),
                                 get_long(p, "ensemble", 32, 2, "params.spectrum"),
                                 derive_seed(ctx.seed, kSpectrumStream));
        r.summary["spectrum"] = spec->to_json();
    }

    if (cocycle.is_random_walk(system)) {
        const FurstenbergEstimate fe = furstenberg_top_exponent(cocycle, system, est.measure);
        json f = {{"estimate", fe.estimate}, {"stderr", fe.stderr_}};
        if (spec) {
            f.update(spectrum_comparison(fe.estimate, fe.stderr_, spec->exponents[0], spec->stderrs[0], 2.0));
        }
        r.summary["furstenberg"] = f;
    }

    std::string csv;
    std::optional<ProperFit> fit;
    if (ctx.params.contains("properness")) {
        const json& p = ctx.params["properness"];
        check_keys(p, {"eps", "subspaces"}, "params.properness");
        std::vector<double> eps = {0.2, 0.1, 0.05, 0.025};
        if (p.contains("eps")) {
            eps = p["eps"].get<std::vector<double>>();
        }
        std::vector<Matrix> subspaces;
        for (const auto& s : require(p, "subspaces", "params.properness")) {
            subspaces.push_back(subspace_from_json(s));
            if (subspaces.back().rows() != d || subspaces.back().cols() >= d) {
                throw ValidationError("properness: subspaces must be proper subspaces of R^d");
            }
        }
        fit = properness_profile(est.measure, subspaces, eps);
        json profiles = json::array();
        for (const auto& pr : fit->profiles) {
            profiles.push_back({{"subspace", matrix_to_json(pr.subspace.transpose())},
                                {"masses", pr.masses},
                                {"exponent", pr.exponent},
                                {"exponent_stderr", pr.exponent_stderr},
                                {"ci_low", pr.ci_low},
                                {"ci_high", pr.ci_high}});
        }
        r.summary["properness"] = {{"verdict", fit->proper ? "proper" : "not proper"},
                                   {"eps", fit->eps},
                                   {"max_weight", fit->max_weight},
                                   {"profiles", profiles}};
        std::ostringstream out;
        write_properness_csv(out, *fit);
        csv = out.str();
    }

    if (ctx.params.contains("contraction")) {
        const json& p = ctx.params["contraction"];
        check_keys(p, {"n", "points"}, "params.contraction");
        const auto n_list = get_long_list(p, "n", {25, 50, 100, 200}, "params.contraction");
        const long points = get_long(p, "points", 40, 1, "params.contraction");
        const std::uint64_t base = derive_seed(ctx.seed, kContractionStream);

        struct PointResult {
            ContractionCurve curve;
            double flag_gap = 0.0;
            bool resolved = false;
        };
        const auto results = parallel_map<PointResult>(static_cast<std::size_t>(points), [&](std::size_t i) {
            const OrbitWindow x(system, derive_seed(base, i));
            PointResult pr;
            pr.curve = dirac_contraction(cocycle, x, est.measure, n_list);
            try {
                const Flag psi = psi_minus(cocycle, x, n_list.back());
                pr.flag_gap = flag_distance(pr.curve.points.back().center, psi);
                pr.resolved = true;
            } catch (const InsufficientGap&) {
            }
            return pr;
        });

        std::vector<double> median_diam;
        json per_n = json::array();
        std::ostringstream out;
        out << "n,median_diameter,fraction_below\n";
        for (std::size_t k = 0; k < n_list.size(); ++k) {
            std::vector<double> diam;
            long below = 0;
            for (const auto& pr : results) {
                diam.push_back(pr.curve.points[k].diameter);
                below += pr.curve.points[k].diameter < kContractionTolerance ? 1 : 0;
            }
            const double frac = static_cast<double>(below) / static_cast<double>(points);
            per_n.push_back({{"n", n_list[k]}, {"median_diameter", median(diam)}, {"fraction_below", frac}});
            out << n_list[k] << ',' << num(median(diam)) << ',' << num(frac) << '\n';
        }
        long matched = 0;
        long resolved = 0;
        long monotone = 0;
        std::vector<double> gaps;
        for (const auto& pr : results) {
            monotone += pr.curve.non_increasing ? 1 : 0;
            if (pr.resolved) {
                ++resolved;
                gaps.push_back(pr.flag_gap);
                matched += pr.flag_gap < kContractionTolerance ? 1 : 0;
            }
        }
        const double last_frac = per_n.back()["fraction_below"].get<double>();
        r.summary["contraction"] = {
            {"points", points},
            {"curve", per_n},
            {"tolerance", kContractionTolerance},
            {"fraction_below_at_max_n", last_frac},
            {"fraction_non_increasing", static_cast<double>(monotone) / static_cast<double>(points)},
            {"psi_minus_resolved", resolved},
            {"fraction_matching_psi_minus",
             resolved > 0 ? static_cast<double>(matched) / static_cast<double>(resolved) : 0.0},
            {"median_distance_to_psi_minus", gaps.empty() ? json(nullptr) : json(median(gaps))}};
        csv = out.str();
    }

    if (ctx.params.contains("harmonic")) {
        const json& p = ctx.params["harmonic"];
        check_keys(p, {"M", "n"}, "params.harmonic");
        const long m = get_long(p, "M", 200, 2, "params.harmonic");
        const long hn = get_long(p, "n", 200, 1, "params.harmonic");
        const OrbitWindow x(system, derive_seed(ctx.seed, kHarmonicStream));
        const HarmonicFamily h = harmonic_family(cocycle, x, m, hn, derive_seed(ctx.seed, kHarmonicStream + 1));
        json hj = {{"M", m},
                   {"n", hn},
                   {"resampled", h.resampled},
                   {"max_weight", h.measure.max_weight()},
                   {"martingale_z", h.martingale.z},
                   {"martingale_max_z", h.martingale.max_z}};
        if (system.is_iid()) {
            std::vector<Flag> atoms;
            for (const auto& a : est.measure.atoms()) {
                atoms.push_back(a.flag);
            }
            hj["iid_against_stationary_max_z"] = compare_samples(h.samples, atoms).max_z;
        }
        r.summary["harmonic"] = hj;
    }

    if (ctx.params.contains("growth")) {
        const json& p = ctx.params["growth"];
        check_keys(p, {"n", "ensemble"}, "params.growth");
        const long gn = get_long(p, "n", 400, 1, "params.growth");
        const GrowthRateEstimate g = growth_rates(cocycle, system, gn, get_long(p, "ensemble", 64, 2, "params.growth"),
                                                  derive_seed(ctx.seed, kGrowthStream));
        json gj = {{"n", gn}, {"root_rates", g.root_rates}, {"stderrs", g.stderrs}};
        if (spec) {
            json z = json::array();
            for (std::size_t i = 0; i + 1 < spec->exponents.size(); ++i) {
                const double gap = spec->exponents[i] - spec->exponents[i + 1];
                const double sigma = std::hypot(g.stderrs[i], spec->gap_stderrs[i]);
                z.push_back(z_score(g.root_rates[i], gap, sigma));
            }
            gj["z_against_spectral_gaps"] = z;
        }
        const OrbitWindow x(system, derive_seed(ctx.seed, kGrowthStream + 1));
        std::vector<long> n_list;
        for (long k = gn / 8; k <= gn; k *= 2) {
            n_list.push_back(std::max(1L, k));
        }
        gj["diverging_along_single_orbit"] = contraction_growth_check(cocycle, x, n_list).diverging;
        r.summary["growth"] = gj;
    }

    if (csv.empty()) {
        std::ostringstream out;
        out << "atom,weight";
        for (int i = 0; i < d; ++i) {
            out << ",e1_" << i;
        }
        out << '\n';
        for (std::size_t a = 0; a < est.measure.atoms().size(); ++a) {
            const auto& atom = est.measure.atoms()[a];
            out << a << ',' << num(atom.weight);
            for (int i = 0; i < d; ++i) {
                out << ',' << num(atom.flag.line()(i));
            }
            out << '\n';
        }
        csv = out.str();
    }
    r.samples_csv = csv;

    std::ostringstream h;
    h << "stationary: " << est.measure.atoms().size() << " atoms, refresh max z = " << num(est.refresh.max_z);
    if (r.summary.contains("furstenberg")) {
        h << ", furstenberg lambda_1 = " << num(r.summary["furstenberg"]["estimate"].get<double>());
    }
    if (fit) {
        h << ", " << (fit->proper ? "proper" : "not proper");
    }
    r.headline = h.str();
    return r;
}

// ---------------------------------------------------------------------------

ExperimentResult run_induce(const Context& ctx)
{
    check_keys(ctx.params, {"indicator", "n", "ensemble", "seed", "mass_ensemble"}, "params");
    const auto system = SymbolicSystem::from_json(require(ctx.config, "system", "config"));
    const auto cocycle = CocycleSpec::from_json(require(ctx.config, "cocycle", "config"), system);
    const Indicator indicator = Indicator::from_json(require(ctx.params, "indicator", "params"), system);
    const long n = get_long(ctx.params, "n", 25000, 100, "params");
    const long ensemble = ensemble_param(ctx, 32);
    const long mass_ensemble = get_long(ctx.params, "mass_ensemble", 100000, 1, "params");

    const InducedSpectrumReport rep =
        induced_spectrum_check(cocycle, system, indicator, n, ensemble, ctx.seed, mass_ensemble);

    ExperimentResult r;
    r.summary["indicator"] = indicator.name();
    r.summary["measured_mass"] = {{"estimate", rep.measured_mass}, {"stderr", rep.mass_stderr}};
    if (const auto exact = indicator.exact_measure(system)) {
        r.summary["measured_mass"]["exact"] = *exact;
    }
    r.summary["base"] = rep.base.to_json();
    r.summary["induced"] = rep.induced.to_json();
    r.summary["ratios"] = rep.ratios;
    r.summary["expected_ratio"] = rep.expected_ratio;
    r.summary["max_relative_deviation"] = rep.max_relative_deviation;
    r.summary["returns"] = {{"mean", rep.returns.mean}, {"stderr", rep.returns.stderr_}, {"count", rep.returns.count}};
    r.summary["kac"] = {{"product", rep.kac.product}, {"sigma", rep.kac.sigma}, {"z", rep.kac.z}};

    std::ostringstream csv;
    csv << "member";
    for (std::size_t i = 0; i < rep.base.exponents.size(); ++i) {
        csv << ",base_lambda_" << i + 1;
    }
    for (std::size_t i = 0; i < rep.induced.exponents.size(); ++i) {
        csv << ",induced_lambda_" << i + 1;
    }
    csv << '\n';
    for (std::size_t m = 0; m < rep.base.members.size(); ++m) {
        csv << m;
        for (double v : rep.base.members[m]) {
            csv << ',' << num(v);
        }
        for (double v : rep.induced.members.at(m)) {
            csv << ',' << num(v);
        }
        csv << '\n';
    }
    r.samples_csv = csv.str();

    std::ostringstream h;
    h << "induce: lambda*_1 / lambda_1 = " << num(rep.ratios.front()) << " vs 1/m(X*) = " << num(rep.expected_ratio)
      << ", Kac z = " << num(rep.kac.z);
    r.headline = h.str();
    return r;
}

// ---------------------------------------------------------------------------

ExperimentResult run_flags(const Context& ctx)
{
    check_keys(ctx.params, {"n", "ensemble", "seed", "orbit_length", "frame_ensemble", "spectrum"}, "params");
    const auto system = SymbolicSystem::from_json(require(ctx.config, "system", "config"));
    const auto cocycle = CocycleSpec::from_json(require(ctx.config, "cocycle", "config"), system);
    const long n = get_long(ctx.params, "n", 400, 1, "params");
    const long ensemble = ensemble_param(ctx, 200, 1);
    const long orbit_length = get_long(ctx.params, "orbit_length", 2000, 1, "params");
    const long frame_ensemble = get_long(ctx.params, "frame_ensemble", 16, 2, "params");

    const EquivarianceReport eq = equivariance_check(cocycle, system, n, ensemble, ctx.seed);
    const FrameReductionReport fr =
        frame_reduction_check(cocycle, system, n, orbit_length, frame_ensemble, derive_seed(ctx.seed, kFrameStream));

    ExperimentResult r;
    r.summary["equivariance"] = {{"n", n},
                                 {"samples", eq.samples},
                                 {"median_sine", eq.median},
                                 {"p95_sine", eq.p95},
                                 {"transverse_fraction", eq.transverse_fraction},
                                 {"insufficient_gap_fraction", eq.insufficient_gap_fraction}};
    json frame = {{"orbit_length", orbit_length},
                  {"samples", fr.samples},
                  {"median_off_diagonal", fr.median_off_diagonal},
                  {"p95_off_diagonal", fr.p95_off_diagonal},
                  {"diagonal_means", fr.diagonal_means},
                  {"diagonal_stderrs", fr.diagonal_stderrs},
                  {"min_conditioning", fr.min_conditioning},
                  {"insufficient_gap_fraction", fr.insufficient_gap_fraction}};

    json sp = ctx.params.value("spectrum", json::object());
    check_keys(sp, {"n", "ensemble"}, "params.spectrum");
    const Spectrum spec = lyapunov_spectrum(cocycle, system, get_long(sp, "n", 20000, 100, "params.spectrum"),
                                            get_long(sp, "ensemble", 32, 2, "params.spectrum"),
                                            derive_seed(ctx.seed, kSpectrumStream));
    json z = json::array();
    for (std::size_t i = 0; i < spec.exponents.size() && i < fr.diagonal_means.size(); ++i) {
        z.push_back(z_score(fr.diagonal_means[i], spec.exponents[i], std::hypot(fr.diagonal_stderrs[i], spec.stderrs[i])));
    }
    frame["z_against_spectrum"] = z;
    r.summary["frame"] = frame;
    r.summary["spectrum"] = spec.to_json();

    std::ostringstream csv;
    csv << "sample,sine,transversality\n";
    for (std::size_t i = 0; i < eq.sines.size(); ++i) {
        csv << i << ',' << num(eq.sines[i]) << ',' << num(i < eq.transversality.size() ? eq.transversality[i] : 0.0)
            << '\n';
    }
    r.samples_csv = csv.str();

    std::ostringstream h;
    h << "flags: median sine = " << num(eq.median) << ", transverse = " << num(eq.transverse_fraction)
      << ", median off-diagonal = " << num(fr.median_off_diagonal);
    r.headline = h.str();
    return r;
}

// ---------------------------------------------------------------------------

ExperimentResult run_boundary(const Context& ctx)
{
    check_keys(ctx.params, {"seed", "stability", "cylinders", "martingale", "skew"}, "params");
    PathEnsemble e = PathEnsemble::from_json(require(ctx.config, "ensemble", "config"));
    e.seed = ctx.seed;
    if (ctx.ensemble) {
        if (*ctx.ensemble < 1) {
            throw ValidationError("--ensemble must be >= 1");
        }
        e.count = *ctx.ensemble;
    }
    const long s = get_long(ctx.params, "stability", kDefaultStability, 1, "params");

    ExperimentResult r;
    r.summary["ensemble"] = e.to_json();
    std::string csv;
    std::ostringstream h;
    h << "boundary:";

    if (ctx.params.contains("cylinders")) {
        std::vector<ReducedWord> words;
        for (const auto& w : ctx.params["cylinders"]) {
            words.push_back(ReducedWord::parse(w.get<std::string>()));
            if (words.back().empty()) {
                throw ValidationError("cylinders: the empty word is not a cylinder");
            }
        }
        const HarmonicMeasureReport rep = harmonic_measure(e, words, s);
        json cyl = json::array();
        std::ostringstream out;
        out << "prefix,estimate,stderr,exact\n";
        for (const auto& c : rep.cylinders) {
            json cj = {{"prefix", c.prefix.str()}, {"estimate", c.estimate}, {"stderr", c.stderr_}};
            std::string exact_str;
            if (e.mu.is_uniform()) {
                const double exact = HarmonicFunction(e.mu, BoundarySet{c.prefix, false})(ReducedWord{});
                cj["exact"] = exact;
                cj["z"] = z_score(c.estimate, exact, c.stderr_);
                exact_str = num(exact);
            }
            out << c.prefix.str() << ',' << num(c.estimate) << ',' << num(c.stderr_) << ',' << exact_str << '\n';
            cyl.push_back(cj);
            h << " nu(" << c.prefix.str() << ") = " << num(c.estimate);
        }
        r.summary["harmonic_measure"] = {
            {"cylinders", cyl}, {"resolved", rep.resolved}, {"resolved_fraction", rep.resolved_fraction}};
        csv = out.str();
    }

    if (ctx.params.contains("skew")) {
        const json& p = ctx.params["skew"];
        check_keys(p, {"shift", "max_len"}, "params.skew");
        const long shift = get_long(p, "shift", 1, 1, "params.skew");
        const long max_len = get_long(p, "max_len", 2, 1, "params.skew");
        const SkewInvarianceReport rep = boundary_skew_invariance(e, shift, static_cast<int>(max_len), s);
        json cells = json::array();
        std::ostringstream out;
        out << "omega_prefix,x_prefix,before,after,z\n";
        for (const auto& c : rep.cells) {
            std::string omega;
            for (Letter l : c.omega_prefix) {
                omega += letter_name(l);
            }
            const std::string x = c.x_prefix.empty() ? "e" : c.x_prefix.str();
            const std::string o = omega.empty() ? "e" : omega;
            cells.push_back({{"omega", o}, {"x", x}, {"before", c.before}, {"after", c.after}, {"z", c.z}});
            out << o << ',' << x << ',' << num(c.before) << ',' << num(c.after) << ',' << num(c.z) << '\n';
        }
        r.summary["skew_invariance"] = {
            {"shift", shift}, {"max_len", max_len}, {"samples", rep.samples}, {"skipped", rep.skipped}, {"max_z", rep.max_z}, {"cells", cells}};
        csv = out.str();
        h << " skew max z = " << num(rep.max_z);
    }

    if (ctx.params.contains("martingale")) {
        const json& p = ctx.params["martingale"];
        check_keys(p, {"D", "complement", "eps", "grid"}, "params.martingale");
        const BoundarySet d{ReducedWord::parse(require(p, "D", "params.martingale").get<std::string>()),
                            get_bool(p, "complement", false, "params.martingale")};
        const double eps = get_double(p, "eps", 0.05, "params.martingale");
        const auto grid = get_long_list(p, "grid", {10, 25, 50, 100, 200}, "params.martingale");
        const MartingaleCurve curve = martingale_check(e, d, eps, grid, s);
        json points = json::array();
        for (const auto& pt : curve.points) {
            points.push_back({{"n", pt.n}, {"fraction", pt.fraction}, {"stderr", pt.stderr_}});
        }
        r.summary["martingale"] = {{"D", d.prefix.str()},
                                   {"complement", d.complement},
                                   {"eps", eps},
                                   {"exact_h", curve.exact_h},
                                   {"unresolved", curve.unresolved},
                                   {"points", points}};
        std::ostringstream out;
        write_martingale_csv(out, curve);
        csv = out.str();
        h << " martingale fraction at n = " << curve.points.back().n << ": " << num(curve.points.back().fraction);
    }

    if (csv.empty()) {
        throw ValidationError("boundary: params must request \"cylinders\", \"martingale\" or \"skew\"");
    }
    r.samples_csv = csv;
    r.headline = h.str();
    return r;
}

// ---------------------------------------------------------------------------

ExperimentResult run_skew(const Context& ctx)
{
    check_keys(ctx.params, {"n", "ensemble", "seed", "observables", "rho_n", "z0"}, "params");
    const auto system = SymbolicSystem::from_json(require(ctx.config, "system", "config"));
    const SkewSystem skew = SkewSystem::from_json(require(ctx.config, "skew", "config"), system);
    const long n = get_long(ctx.params, "n", 100000, 1, "params");
    const long ensemble = ensemble_param(ctx, 32);

    std::vector<SkewObservable> observables;
    if (ctx.params.contains("observables")) {
        for (const auto& o : ctx.params["observables"]) {
            observables.push_back(SkewObservable::from_json(o, system));
        }
    } else {
        for (Symbol a = 0; a < system.size(); ++a) {
            for (int z = 0; z < skew.z_size(); ++z) {
                SkewObservable o;
                o.x_constraints = {{skew.window(), a}};
                o.z_state = z;
                o.name = "x_" + std::to_string(skew.window()) + "=" + system.name(a) + ";z=" + std::to_string(z);
                observables.push_back(o);
            }
        }
    }
    const long z0 = get_long(ctx.params, "z0", 0, 0, "params");
    const SkewErgodicityReport rep = skew_ergodicity_test(skew, observables, n, ensemble, ctx.seed, static_cast<int>(z0));

    ExperimentResult r;
    json obs = json::array();
    std::ostringstream csv;
    csv << "observable,birkhoff_mean,stderr,space_average,z\n";
    for (const auto& o : rep.observables) {
        obs.push_back({{"name", o.name},
                       {"birkhoff_mean", o.birkhoff_mean},
                       {"stderr", o.stderr_},
                       {"space_average", o.space_average},
                       {"z", o.z}});
        csv << o.name << ',' << num(o.birkhoff_mean) << ',' << num(o.stderr_) << ',' << num(o.space_average) << ','
            << num(o.z) << '\n';
    }
    r.summary["ergodicity"] = {{"n", n}, {"ensemble", ensemble}, {"z0", z0}, {"max_z", rep.max_z}, {"observables", obs}};
    if (skew.has_rho()) {
        const long rho_n = get_long(ctx.params, "rho_n", 20000, 100, "params");
        r.summary["rho_spectrum"] =
            skew_lyapunov_spectrum(skew, rho_n, ensemble, derive_seed(ctx.seed, kSpectrumStream)).to_json();
    }
    r.samples_csv = csv.str();
    r.headline = "skew: max z over " + std::to_string(rep.observables.size()) +
                 " product cylinders = " + num(rep.max_z);
    return r;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
}

std::uint64_t resolve_seed(const json& config, const json& params, const RunOverrides& overrides)
{
    if (overrides.seed) {
        return *overrides.seed;
    }
    const auto read = [](const json& j, const char* where) {
        if (!j.is_number_unsigned() && !j.is_number_integer()) {
            throw ValidationError(std::string(where) + ": seed must be a non-negative integer");
        }
        if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0) {
            throw ValidationError(std::string(where) + ": seed must be a non-negative integer");
        }
        return j.get<std::uint64_t>();
    };
    if (params.contains("seed")) {
        return read(params["seed"], "params");
    }
    for (const char* block : {"system", "ensemble"}) {
        if (config.contains(block) && config[block].is_object() && config[block].contains("seed")) {
            return read(config[block]["seed"], block);
        }
    }
    throw ValidationError("no seed: pass --seed or set params.seed / system.seed");
}

} // namespace

int run_impl(const std::string& kind, const std::optional<nlohmann::json>& inline_config,
                     const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                     const RunOverrides& overrides, std::ostream& out, std::ostream& err);

nlohmann::json load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

ExperimentResult run_experiment(const nlohmann::json& config, const RunOverrides& overrides)
{
    check_keys(config, {"experiment", "system", "cocycle", "skew", "ensemble", "params"}, "config");
    const std::string kind = require(config, "experiment", "config").get<std::string>();
    Context ctx;
    ctx.config = config;
    ctx.params = config.value("params", json::object());
    if (!ctx.params.is_object()) {
        throw ValidationError("config: \"params\" must be an object");
    }
    ctx.seed = resolve_seed(config, ctx.params, overrides);
    ctx.ensemble = overrides.ensemble;

    ExperimentResult r;
    if (kind == "spectrum") {
        r = run_spectrum(ctx);
    } else if (kind == "stationary") {
        r = run_stationary(ctx);
    } else if (kind == "induce") {
        r = run_induce(ctx);
    } else if (kind == "flags") {
        r = run_flags(ctx);
    } else if (kind == "boundary") {
        r = run_boundary(ctx);
    } else if (kind == "skew") {
        r = run_skew(ctx);
    } else {
        throw ValidationError("config: unknown experiment \"" + kind + "\"");
    }
    json summary = {{"experiment", kind}, {"seed", ctx.seed}};
    summary.update(r.summary);
    r.summary = summary;
    return r;
}

std::string dump_summary(const nlohmann::json& summary) { return summary.dump(2) + "\n"; }

void write_atomically(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, content);
    std::filesystem::rename(tmp, path);
}

int run_to_directory(const std::string& kind, const std::filesystem::path& config_path,
                     const std::filesystem::path& out_dir, const RunOverrides& overrides, std::ostream& out,
                     std::ostream& err)
{
    return run_impl(kind, std::optional<nlohmann::json>{}, config_path, out_dir, overrides, out, err);
}

int run_config_to_directory(const std::string& kind, const nlohmann::json& config, const std::filesystem::path& out_dir,
                     const RunOverrides& overrides, std::ostream& out, std::ostream& err)
{
    return run_impl(kind, std::optional<nlohmann::json>{config}, {}, out_dir, overrides, out, err);
}

int run_impl(const std::string& kind, const std::optional<nlohmann::json>& inline_config,
                     const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                     const RunOverrides& overrides, std::ostream& out, std::ostream& err)
{
    const auto fail = [&](int code, const std::string& type, const std::string& what) {
        err << "error [" << type << "]: " << what << '\n';
        return code;
    };
    try {
        json config = inline_config ? *inline_config : load_config(config_path);
        if (!config.is_object()) {
            throw ValidationError("config: expected a JSON object");
        }
        if (!kind.empty()) {
            if (config.contains("experiment") && config["experiment"] != kind) {
                throw ValidationError("config is a \"" + config["experiment"].get<std::string>() +
                                      "\" experiment, not \"" + kind + "\"");
            }
            config["experiment"] = kind;
        }
        const ExperimentResult r = run_experiment(config, overrides);

        std::filesystem::create_directories(out_dir);
        const auto summary_path = out_dir / "summary.json";
        const auto csv_path = out_dir / "samples.csv";
        auto summary_tmp = summary_path;
        summary_tmp += ".tmp";
        auto csv_tmp = csv_path;
        csv_tmp += ".tmp";
        try {
            write_file(summary_tmp, dump_summary(r.summary));
            write_file(csv_tmp, r.samples_csv);
            std::filesystem::rename(summary_tmp, summary_path);
            std::filesystem::rename(csv_tmp, csv_path);
        } catch (...) {
            std::error_code ec;
            std::filesystem::remove(summary_tmp, ec);
            std::filesystem::remove(csv_tmp, ec);
            throw;
        }
        out << r.headline << '\n';
        return kExitOk;
    } catch (const ValidationError& e) {
        return fail(kExitValidation, "ValidationError", e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(kExitValidation, "ValidationError", e.what());
    } catch (const DegenerateTuple& e) {
        return fail(kExitValidation, "DegenerateTuple", e.what());
    } catch (const InsufficientGap& e) {
        return fail(kExitNumeric, "InsufficientGap", e.what());
    } catch (const ReturnCapExceeded& e) {
        return fail(kExitNumeric, "ReturnCapExceeded", e.what());
    } catch (const EmptyIndicator& e) {
        return fail(kExitNumeric, "EmptyIndicator", e.what());
    } catch (const NumericalBreakdown& e) {
        return fail(kExitNumeric, "NumericalBreakdown", e.what());
    } catch (const NumericError& e) {
        return fail(kExitNumeric, "NumericError", e.what());
    } catch (const NotTransverse& e) {
        return fail(kExitNumeric, "NotTransverse", e.what());
    } catch (const std::exception& e) {
        return fail(kExitFailure, "error", e.what());
    }
}

} // namespace cocyclab
