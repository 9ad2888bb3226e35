#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "escape/induced.hpp"
#include "escape/maps.hpp"

namespace escape {

/// Hole entry of a config: {"center": c, "width": w} (full width),
/// {"center": c, "mu": m} (width chosen so mu_X(H) = m) or {"empty": true}.
struct HoleSpec {
    std::string name;
    bool empty = false;
    double center = 0.0;
    std::optional<double> width;
    std::optional<double> mu;

    bool operator==(const HoleSpec&) const = default;
};

/// "auto", {"m": m} for LSV (a_m, 1] and Farey [t_m, 1], or
/// {"side": "minus" | "plus" | "both", "n": n} for the intermittent map.
struct BaseSpec {
    enum class Kind { Auto, Level, Intermittent };
    Kind kind = Kind::Auto;
    int m = 2;
    IntermittentSide side = IntermittentSide::Both;
    int n = 0;

    bool operator==(const BaseSpec&) const = default;
};

struct ExperimentConfig {
    MapSpec map;
    BaseSpec base;
    std::vector<HoleSpec> holes;
    int horizon = 100;

    bool run_mc = true;
    bool run_ulam = false;
    bool run_predict = true;

    std::int64_t mc_samples = 100000;
    std::uint64_t mc_seed = 0;
    std::int64_t mc_burn_in = 10000;

    int ulam_cells = 4096;
    double ulam_ratio = 1.05;
    double ulam_min_cell = 1e-7;

    int induced_cells = 2048;
    int induced_subsamples = 64;
    int induced_cap = 1000;

    int tail_horizon = 1000;
    int tail_scan_cells = 200000;

    double sigma = 0.05;
    int admissibility_depth = 2;
    bool require_admissible = true;

    std::string output = "out";

    bool operator==(const ExperimentConfig&) const;
};

/// Validates a config document. Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInadmissible = 3;

struct RunResult {
    int exit_code = kExitOk;
    nlohmann::json summary;                    // also written as summary.json
    std::vector<std::filesystem::path> files;  // everything written, in order
};

/// Runs the enabled engines and writes, under `out`:
///   config.json, holes.json, tail.csv, mc_<hole>.csv, ulam_<hole>.csv,
///   prediction_<hole>.csv, verdict.json, summary.json.
/// Config problems throw ConfigError; inadmissible holes (when required)
/// stop the run after holes.json with exit code 3.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Resolves the base interval of a config.
Interval resolve_base(const ExperimentConfig& cfg, const PiecewiseMap& map);

/// Tail sequence of the configured induced system, as used by the predict engine.
TailSequence config_tail(const ExperimentConfig& cfg);

} // namespace escape
