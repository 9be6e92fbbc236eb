#include "lifsim/experiment.hpp"

#include "lifsim/errors.hpp"
#include "lifsim/random.hpp"

#include <filesystem>
#include <fstream>

namespace lifsim {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os.precision(17);
    return os;
}

std::filesystem::path prepare(const std::string& dir) {
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

nlohmann::json snapping(const SnappedTimes& t) {
    return {{"requested", t.requested}, {"snapped", t.snapped}, {"max_distance", t.max_distance}};
}

}  // namespace

nlohmann::json manifest(const ScenarioConfig& cfg, const std::string& experiment, std::int64_t n_samples) {
    std::vector<std::uint64_t> seeds;
    for (std::int64_t k = 0; k < n_samples; ++k) seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    return {{"tool", "lifsim"},
            {"version", version()},
            {"experiment", experiment},
            {"config", to_json(cfg)},
            {"config_hash", config_hash(cfg)},
            {"seed", cfg.seed},
            {"network_seed", cfg.network_seed},
            {"n_samples", n_samples},
            {"sample_seeds", seeds}};
}

void write_strong_outputs(const std::string& dir, const ScenarioConfig& cfg, const StrongExperimentResult& result) {
    const auto root = prepare(dir);
    {
        auto os = open_output(root / "raw.csv");
        os << "sample,h,depth,T,matched,squared_gap,impact\n";
        for (const auto& r : result.raw)
            os << r.sample << ',' << r.h << ',' << r.depth << ',' << r.T << ',' << (r.matched ? 1 : 0) << ','
               << r.squared_gap << ',' << r.impact << '\n';
    }
    {
        auto os = open_output(root / "summary.csv");
        write_summary_csv(os, result.summary);
    }
    auto m = manifest(cfg, "strong", result.n_samples);
    m["checkpoints"] = snapping(result.times);
    m["mse_convention"] = "sum of squares over the prefix state (v, I), averaged over matched samples";
    m["pool_ok"] = result.pool_ok;
    m["pool_message"] = result.pool_message;
    m["mean_reference_spikes_per_neuron"] = result.mean_reference_spikes;
    m["mean_slow_crossings_per_neuron"] = result.mean_slow_crossings;
    auto os = open_output(root / "manifest.json");
    os << m.dump(2) << '\n';
}

void write_weak_outputs(const std::string& dir, const ScenarioConfig& cfg, const WeakExperimentResult& result) {
    const auto root = prepare(dir);
    {
        auto os = open_output(root / "raw.csv");
        os << "sample,h,depth,T,coarse,reference\n";
        for (const auto& r : result.raw)
            os << r.sample << ',' << r.h << ',' << r.depth << ',' << r.T << ',' << r.coarse << ',' << r.reference
               << '\n';
    }
    {
        auto os = open_output(root / "summary.csv");
        write_summary_csv(os, result.summary);
    }
    auto m = manifest(cfg, "weak", result.n_samples);
    m["checkpoints"] = snapping(result.times);
    auto os = open_output(root / "manifest.json");
    os << m.dump(2) << '\n';
}

void write_lyapunov_outputs(const std::string& dir, const ScenarioConfig& cfg, const nlohmann::json& report) {
    const auto root = prepare(dir);
    auto m = manifest(cfg, "lyapunov", 0);
    m["report"] = report;
    auto os = open_output(root / "manifest.json");
    os << m.dump(2) << '\n';
}

}  // namespace lifsim
