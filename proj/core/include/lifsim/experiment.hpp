#pragma once

#include "lifsim/analysis.hpp"
#include "lifsim/config.hpp"
#include "lifsim/lyapunov.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <vector>

namespace lifsim {

/// Library version string.
const char* version();

/// Worker count from LIFSIM_WORKERS, else the hardware concurrency (at least 1).
int default_worker_count();

/// Runs fn(k) for k in [0, n) on `workers` threads. Each index runs exactly once; the first exception
/// is rethrown after all workers stop. Callers store results by index and reduce in order.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

struct RunOptions {
    int workers = 1;
};

/// Per-sample outcome of one (h, depth, T) cell of the strong study.
struct StrongRecord {
    std::int64_t sample = 0;
    double h = 0.0;
    int depth = 0;
    double T = 0.0;
    bool matched = false;
    double squared_gap = 0.0;
    double impact = 0.0;
};

struct StrongExperimentResult {
    ErrorSummary summary;
    std::vector<StrongRecord> raw;
    std::int64_t n_samples = 0;
    SnappedTimes times;
    bool pool_ok = true;
    std::string pool_message;
    /// Mean reference spikes per monitored neuron, and those with A in [0.5, 2] sqrt(h), per h (at the horizon).
    double mean_reference_spikes = 0.0;
    std::vector<double> mean_slow_crossings;
};

/// Coupled strong-error study: per sample one reference run at h_ref and every coarse h driven by block
/// sums of the same fine path; all prefix depths and checkpoint times are views of that run. The pool
/// grows by cfg.pools.batch until every cell has cfg.pools.matched_floor matched samples or
/// cfg.pools.strong_max is reached (pool_ok = false in that case).
StrongExperimentResult run_strong_experiment(const ScenarioConfig& cfg, const std::vector<int>& depths,
                                             const RunOptions& options = {});

struct WeakRecord {
    std::int64_t sample = 0;
    double h = 0.0;
    int depth = 0;
    double T = 0.0;
    double coarse = 0.0;
    double reference = 0.0;
};

struct WeakExperimentResult {
    ErrorSummary summary;
    std::vector<WeakRecord> raw;
    std::int64_t n_samples = 0;
    SnappedTimes times;
};

/// Paired weak-error study with the readout observable of the last layer of each prefix. The pool starts
/// at weak_min and grows toward weak_max while some cell has |bias| < 2 standard errors.
WeakExperimentResult run_weak_experiment(const ScenarioConfig& cfg, const std::vector<int>& depths,
                                         const RunOptions& options = {});

/// Flux, two-copy, and hybrid exponents of canonical variants built from the configured neuron:
/// a constant-input deterministic neuron, the subthreshold (zero-drive, noiseless) network, and a noisy
/// single neuron.
nlohmann::json run_lyapunov_experiment(const ScenarioConfig& cfg, const RunOptions& options = {});

struct CalibrationOptions {
    double target_rate = 20.0;  ///< spikes per neuron per unit time
    double horizon = 10.0;
    std::int64_t samples = 4;
    double h = 1.0 / 256.0;
    int iterations = 30;
};

struct CalibrationResult {
    std::vector<double> drives;
    std::vector<double> rates;
};

/// Sets b_l layer by layer so that the mean layer rate hits the target, by bisection with common random numbers.
CalibrationResult calibrate_drives(const ScenarioConfig& cfg, const CalibrationOptions& options = {},
                                   const RunOptions& run = {});

/// Writes raw.csv, summary.csv, and manifest.json into `dir` (created if missing).
void write_strong_outputs(const std::string& dir, const ScenarioConfig& cfg, const StrongExperimentResult& result);
void write_weak_outputs(const std::string& dir, const ScenarioConfig& cfg, const WeakExperimentResult& result);
void write_lyapunov_outputs(const std::string& dir, const ScenarioConfig& cfg, const nlohmann::json& report);

/// Manifest shared by every experiment: config, hash, seeds, version.
nlohmann::json manifest(const ScenarioConfig& cfg, const std::string& experiment, std::int64_t n_samples);

}  // namespace lifsim
