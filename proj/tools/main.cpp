#include "cocyclab/errors.hpp"
#include "cocyclab/experiment.hpp"
#include "cocyclab/fixtures.hpp"
#include "cocyclab/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct RunArgs {
    std::string config;
    std::string fixture;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<long> ensemble;
    int jobs = 0;
};

void add_run_options(CLI::App* cmd, RunArgs& args)
{
    auto* config = cmd->add_option("--config", args.config, "experiment config (JSON)");
    auto* fixture = cmd->add_option("--fixture", args.fixture, "run a shipped fixture instead of a config file");
    config->excludes(fixture);
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--ensemble", args.ensemble, "override the ensemble size (path count for boundary)");
    cmd->add_option("--jobs", args.jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", args.out, "output directory for summary.json and samples.csv");
}

int run_fixture(const std::string& kind, const RunArgs& args)
{
    const auto& f = cocyclab::fixture(args.fixture);
    if (f.experiment != kind) {
        std::cerr << "error [ValidationError]: fixture '" << f.name << "' is a \"" << f.experiment
                  << "\" experiment\n";
        return cocyclab::kExitValidation;
    }
    return cocyclab::run_config_to_directory(kind, f.config, args.out, {args.seed, args.ensemble}, std::cout, std::cerr);
}

int list_fixtures(const std::string& dump_dir)
{
    std::cout << std::left << std::setw(20) << "name" << std::setw(12) << "experiment" << "expected  [basis]\n";
    for (const auto& f : cocyclab::fixtures()) {
        std::cout << std::setw(20) << f.name << std::setw(12) << f.experiment << f.expected << "  [" << f.basis
                  << "]\n";
    }
    if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        for (const auto& f : cocyclab::fixtures()) {
            cocyclab::write_atomically(std::filesystem::path(dump_dir) / (f.name + ".json"), f.config.dump(2) + "\n");
        }
    }
    return cocyclab::kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"cocyclab: Lyapunov spectra, Oseledets flags, stationary measures and boundaries of matrix cocycles"};
    app.require_subcommand(1);

    const char* kinds[] = {"spectrum", "stationary", "induce", "boundary", "flags", "skew"};
    const char* help[] = {"Lyapunov spectrum by QR with the norm-growth oracle",
                          "stationary measure on G/P, harmonic family, properness, contraction",
                          "first-return induced system and spectrum rescaling",
                          "free-group random walk boundary: harmonic measure, martingale, skew product",
                          "Oseledets flags: equivariance and frame reduction",
                          "skew product over a permutation action: ergodicity"};
    RunArgs args;
    std::string selected;
    for (std::size_t i = 0; i < std::size(kinds); ++i) {
        auto* cmd = app.add_subcommand(kinds[i], help[i]);
        add_run_options(cmd, args);
        cmd->callback([&selected, kind = std::string(kinds[i])] { selected = kind; });
    }
    std::string dump_dir;
    auto* fx = app.add_subcommand("fixtures", "list the shipped reference experiments");
    fx->add_option("--out", dump_dir, "also write each fixture config to DIR/<name>.json");
    fx->callback([&selected] { selected = "fixtures"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cocyclab::kExitValidation;
    }

    try {
        if (selected == "fixtures") {
            return list_fixtures(dump_dir);
        }
        cocyclab::set_default_jobs(args.jobs);
        if (!args.fixture.empty()) {
            return run_fixture(selected, args);
        }
        if (args.config.empty()) {
            std::cerr << "error [ValidationError]: --config or --fixture is required\n";
            return cocyclab::kExitValidation;
        }
        return cocyclab::run_to_directory(selected, std::filesystem::path(args.config), args.out, {args.seed, args.ensemble}, std::cout,
                                          std::cerr);
    } catch (const cocyclab::ValidationError& e) {
        std::cerr << "error [ValidationError]: " << e.what() << '\n';
        return cocyclab::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cocyclab::kExitFailure;
    }
}
