#pragma once

#include "lifsim/analysis.hpp"
#include "lifsim/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lifsim {

struct NetworkConfig {
    int depth = 9;
    int width = 24;
    int n_exc = 19;
    int n_inh = 5;
    double p_conn = 0.25;
    double c_w = 0.18;
    double tau_v = 1.0;
    double tau_c = 0.20;
    double v_th = 1.0;
    double v_r = 0.0;
    double sigma = 0.25;
    std::optional<std::vector<double>> drives;  ///< one level per layer; required for runs
};

struct GridConfig {
    double h_ref = 1.0 / 1024.0;
    std::vector<double> h = {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512};
    std::vector<double> checkpoints = {27.85, 55.70, 111.40};  ///< the last entry is the horizon
};

struct PoolConfig {
    std::int64_t strong_min = 400;
    std::int64_t strong_max = 4000;
    std::int64_t matched_floor = 400;
    std::int64_t weak_min = 500;
    std::int64_t weak_max = 5000;
    std::int64_t batch = 100;  ///< samples added per enlargement round
};

struct LyapunovConfig {
    double horizon = 200.0;
    double constant_current = 2.0;  ///< deterministic single-neuron input, in units of i_th
    double noisy_drive = 1.0;       ///< noisy single-neuron drive, in units of i_th
    std::int64_t flux_trains = 200;
    std::int64_t two_copy_runs = 8;
    double renorm_interval = 1.0;
};

struct ScenarioConfig {
    std::string name = "custom";
    NetworkConfig network;
    GridConfig grid;
    PoolConfig pools;
    ReadoutCoefficients observable;
    std::vector<int> strong_depths = {1, 2, 3, 6, 9};
    std::vector<int> weak_depths = {1, 3, 9};
    LyapunovConfig lyapunov;
    std::uint64_t seed = 1;          ///< Monte Carlo seed; sample k uses derive_seed(seed, k)
    std::uint64_t network_seed = 7;  ///< weight sampling seed
    std::string output = "lifsim-out";

    /// Throws ConfigError naming the first invalid field. `require_drives` demands network.drives.
    void validate(bool require_drives = true) const;
};

/// "base" or "strong-coupling". Throws ConfigError for other names.
ScenarioConfig preset(const std::string& name);

nlohmann::json to_json(const ScenarioConfig& cfg);
/// Parses a scenario document; unknown keys and type errors raise ConfigError with the JSON path.
ScenarioConfig config_from_json(const nlohmann::json& doc, bool require_drives = true);
/// Reads and parses a file; a document with a "preset" key starts from that preset.
ScenarioConfig load_config(const std::string& path, bool require_drives = true);

/// Checkpoint times snapped to the nearest multiple of `quantum`, ascending and unique.
struct SnappedTimes {
    std::vector<double> requested;
    std::vector<double> snapped;
    double max_distance = 0.0;
};
SnappedTimes snap_times(const std::vector<double>& times, double quantum);

/// Network described by the configuration (drives applied per layer).
NetworkSpec build_network(const ScenarioConfig& cfg);

/// FNV-1a hash of the canonical JSON dump without the output directory, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace lifsim
