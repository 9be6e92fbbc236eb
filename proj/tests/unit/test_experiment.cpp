#include <doctest.h>

#include "lifsim/config.hpp"
#include "lifsim/errors.hpp"
#include "lifsim/experiment.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace lifsim;

namespace {

ScenarioConfig tiny() {
    ScenarioConfig cfg = preset("base");
    cfg.network.depth = 2;
    cfg.network.width = 4;
    cfg.network.n_exc = 3;
    cfg.network.n_inh = 1;
    cfg.network.drives = std::vector<double>{1.2};
    cfg.grid.h_ref = 1.0 / 512;
    cfg.grid.h = {1.0 / 16, 1.0 / 32, 1.0 / 64};
    cfg.grid.checkpoints = {1.0, 3.0};
    cfg.pools = {40, 400, 30, 40, 80, 20};
    cfg.strong_depths = {1, 2};
    cfg.weak_depths = {2};
    cfg.lyapunov.horizon = 20.0;
    cfg.lyapunov.flux_trains = 4;
    cfg.lyapunov.two_copy_runs = 2;
    cfg.seed = 3;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("parallel_for") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 3, [&](std::int64_t k) { hits[static_cast<std::size_t>(k)] += 1; });
    for (int h : hits) CHECK(h == 1);
    std::atomic<int> calls{0};
    parallel_for(0, 2, [&](std::int64_t) { ++calls; });
    CHECK(calls == 0);
    CHECK_THROWS_AS(parallel_for(50, 2,
                                 [](std::int64_t k) {
                                     if (k == 17) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
    CHECK(default_worker_count() >= 1);
    CHECK(std::string(version()).size() > 0);
}

TEST_CASE("strong experiment on a tiny network") {
    const auto cfg = tiny();
    const auto res = run_strong_experiment(cfg, cfg.strong_depths);
    CHECK(res.pool_ok);
    CHECK(res.n_samples >= cfg.pools.strong_min);
    CHECK(res.times.snapped == std::vector<double>{1.0, 3.0});
    for (int depth : {1, 2}) {
        for (double T : {1.0, 3.0}) {
            for (double h : cfg.grid.h) {
                const auto* n = res.summary.find(h, depth, T, "n_matched");
                REQUIRE(n != nullptr);
                CHECK(n->value >= cfg.pools.matched_floor);
                CHECK(res.summary.find(h, depth, T, "mse") != nullptr);
            }
            CHECK(res.summary.find(0.0, depth, T, "mse_slope") != nullptr);
        }
    }
    // Error shrinks with the step over the ladder.
    const double coarse = res.summary.find(1.0 / 16, 2, 3.0, "mse")->value;
    const double fine = res.summary.find(1.0 / 64, 2, 3.0, "mse")->value;
    CHECK(fine < coarse);
    CHECK(res.raw.size() == static_cast<std::size_t>(res.n_samples) * 3 * 2 * 2);

    SUBCASE("deterministic outputs across worker counts") {
        const auto again = run_strong_experiment(cfg, cfg.strong_depths, RunOptions{2});
        const auto dir = std::filesystem::temp_directory_path() / "lifsim_test_strong";
        write_strong_outputs((dir / "a").string(), cfg, res);
        write_strong_outputs((dir / "b").string(), cfg, again);
        CHECK(slurp(dir / "a" / "raw.csv") == slurp(dir / "b" / "raw.csv"));
        CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));
        const auto m = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
        for (const char* key : {"version", "config", "config_hash", "seed", "n_samples", "sample_seeds", "pool_ok"})
            CHECK(m.contains(key));
        CHECK(m["experiment"] == "strong");
        CHECK(m["sample_seeds"].size() == static_cast<std::size_t>(res.n_samples));
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("strong experiment reports pool failure") {
    auto cfg = tiny();
    cfg.grid.h = {1.0 / 4};
    cfg.grid.checkpoints = {4.0};
    cfg.pools = {20, 40, 40, 40, 80, 20};
    cfg.strong_depths = {2};
    const auto res = run_strong_experiment(cfg, cfg.strong_depths);
    CHECK_FALSE(res.pool_ok);
    CHECK(res.n_samples == 40);
    CHECK_FALSE(res.pool_message.empty());
}

TEST_CASE("weak experiment") {
    auto cfg = tiny();
    SUBCASE("observable without weights has zero bias") {
        cfg.observable.c_v = 0.0;
        cfg.observable.c_i = 0.0;
        cfg.observable.c_r = 0.0;
        const auto res = run_weak_experiment(cfg, cfg.weak_depths);
        for (double h : cfg.grid.h) CHECK(res.summary.find(h, 2, 3.0, "bias")->value == 0.0);
    }
    SUBCASE("paired estimates are reproducible") {
        const auto a = run_weak_experiment(cfg, cfg.weak_depths);
        const auto b = run_weak_experiment(cfg, cfg.weak_depths, RunOptions{2});
        CHECK(a.n_samples >= cfg.pools.weak_min);
        CHECK(a.n_samples <= cfg.pools.weak_max);
        REQUIRE(a.raw.size() == b.raw.size());
        for (std::size_t k = 0; k < a.raw.size(); ++k) {
            CHECK(a.raw[k].coarse == b.raw[k].coarse);
            CHECK(a.raw[k].reference == b.raw[k].reference);
        }
        CHECK(a.summary.find(0.0, 2, 3.0, "bias_slope") != nullptr);
        const auto dir = std::filesystem::temp_directory_path() / "lifsim_test_weak";
        write_weak_outputs(dir.string(), cfg, a);
        CHECK(std::filesystem::exists(dir / "raw.csv"));
        CHECK(nlohmann::json::parse(slurp(dir / "manifest.json"))["experiment"] == "weak");
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("lyapunov experiment report") {
    const auto cfg = tiny();
    const auto rep = run_lyapunov_experiment(cfg);
    CHECK(std::abs(rep["constant_input"]["lambda_hyb"].get<double>()) < 1e-6);
    CHECK(std::abs(rep["constant_input"]["two_copy_lambda"].get<double>()) < 1e-2);
    CHECK(rep["subthreshold"]["lambda_hyb"].get<double>() ==
          doctest::Approx(rep["subthreshold"]["spectral_abscissa"].get<double>()).epsilon(1e-6));
    CHECK(rep["subthreshold"]["n_events"] == 0);
    for (const char* key : {"flux_lambda", "flux_lambda_std_error", "two_copy_lambda", "two_copy_std_error"})
        CHECK(rep["noisy"].contains(key));
    CHECK(rep["noisy"]["flux_lambda"].get<double>() < 0.0);
    const auto dir = std::filesystem::temp_directory_path() / "lifsim_test_lyap";
    write_lyapunov_outputs(dir.string(), cfg, rep);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["report"] == rep);
    std::filesystem::remove_all(dir);
}

TEST_CASE("drive calibration") {
    auto cfg = tiny();
    cfg.network.drives.reset();
    CalibrationOptions opt;
    opt.target_rate = 5.0;
    opt.horizon = 4.0;
    opt.samples = 2;
    opt.iterations = 25;
    const auto res = calibrate_drives(cfg, opt);
    REQUIRE(res.drives.size() == 2);
    REQUIRE(res.rates.size() == 2);
    for (double r : res.rates) CHECK(std::abs(r - 5.0) < 0.5);
    for (double b : res.drives) CHECK(b > 0.0);
}

TEST_CASE("experiments require drives") {
    auto cfg = tiny();
    cfg.network.drives.reset();
    CHECK_THROWS_AS(run_strong_experiment(cfg, {1}), ConfigError);
    CHECK_THROWS_AS(run_weak_experiment(cfg, {1}), ConfigError);
}
