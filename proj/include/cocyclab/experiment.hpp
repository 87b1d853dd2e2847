#pragma once

// Config-driven experiment runner behind the command-line tool.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace cocyclab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> ensemble;
};

struct ExperimentResult {
    nlohmann::json summary;
    /// Contents of samples.csv, header row first.
    std::string samples_csv;
    std::string headline;
};

/// Parses a config file; malformed JSON is a ValidationError.
nlohmann::json load_config(const std::filesystem::path& path);

/// Runs the experiment named by config["experiment"]. The seed is taken
/// from the override, then params.seed, then the system (or ensemble)
/// seed; a config without any seed is rejected. Throws ValidationError or
/// NumericError; performs no I/O.
ExperimentResult run_experiment(const nlohmann::json& config, const RunOverrides& overrides = {});

/// Writes `content` to a temporary sibling and renames it into place.
void write_atomically(const std::filesystem::path& path, const std::string& content);

/// Runs, writes summary.json and samples.csv under out_dir only on success,
/// prints the headline to `out` and errors to `err`. Returns the exit code.
/// `kind`, when non-empty, must match (or supplies) config["experiment"].
int run_to_directory(const std::string& kind, const std::filesystem::path& config_path,
                     const std::filesystem::path& out_dir, const RunOverrides& overrides, std::ostream& out,
                     std::ostream& err);
/// Same, for an in-memory config.
int run_config_to_directory(const std::string& kind, const nlohmann::json& config, const std::filesystem::path& out_dir,
                     const RunOverrides& overrides, std::ostream& out, std::ostream& err);

/// Canonical byte form of a summary (what summary.json contains).
std::string dump_summary(const nlohmann::json& summary);

} // namespace cocyclab
