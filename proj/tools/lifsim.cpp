// lifsim command-line driver.

#include "lifsim/config.hpp"
#include "lifsim/engine.hpp"
#include "lifsim/errors.hpp"
#include "lifsim/experiment.hpp"
#include "lifsim/oracle.hpp"
#include "lifsim/paths.hpp"
#include "lifsim/random.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;
constexpr int exit_pool = 3;
constexpr int exit_numerical = 4;

struct Common {
    std::string config_path;
    std::string preset_name;
    std::vector<double> drives;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "Scenario JSON file");
    cmd->add_option("-p,--preset", c.preset_name, "Start from a preset (base, strong-coupling)");
    cmd->add_option("--drives", c.drives, "Drive level per layer (overrides the configuration)")->delimiter(',');
    cmd->add_option("-s,--seed", c.seed, "Monte Carlo seed");
    cmd->add_option("-w,--workers", c.workers, "Worker threads (default: LIFSIM_WORKERS or all cores)");
    cmd->add_option("-o,--out", c.out, "Output directory");
}

lifsim::ScenarioConfig resolve(const Common& c, bool require_drives) {
    if (!c.config_path.empty() && !c.preset_name.empty())
        throw lifsim::ConfigError("preset", "use either --config or --preset");
    lifsim::ScenarioConfig cfg;
    if (!c.config_path.empty()) cfg = lifsim::load_config(c.config_path, false);
    else if (!c.preset_name.empty()) cfg = lifsim::preset(c.preset_name);
    else throw lifsim::ConfigError("config", "a --config file or a --preset is required");
    if (!c.drives.empty()) cfg.network.drives = c.drives;
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output = c.out;
    cfg.validate(require_drives);
    return cfg;
}

lifsim::RunOptions run_options(const Common& c) {
    lifsim::RunOptions r;
    r.workers = c.workers ? *c.workers : lifsim::default_worker_count();
    if (r.workers < 1) throw lifsim::ConfigError("workers", "must be >= 1");
    return r;
}

int cmd_simulate(const Common& c, double h, double horizon, bool event) {
    const auto cfg = resolve(c, true);
    const auto net = lifsim::build_network(cfg);
    if (horizon <= 0.0) horizon = cfg.grid.checkpoints.back();
    if (h <= 0.0) h = cfg.grid.h_ref;
    const double ratio = h / cfg.grid.h_ref;
    const auto factor = static_cast<int>(std::llround(ratio));
    if (factor < 1 || std::abs(ratio - factor) > 1e-9 || !lifsim::is_power_of_two(factor))
        throw lifsim::ConfigError("step", "must be a power-of-two multiple of grid.h_ref");
    const auto n_steps = static_cast<std::int64_t>(std::ceil(horizon / h - 1e-9));
    horizon = static_cast<double>(n_steps) * h;
    lifsim::BrownianStore store(lifsim::derive_seed(cfg.seed, 0), cfg.grid.h_ref, n_steps * factor,
                                static_cast<int>(net.size()));
    lifsim::TrajectoryRecord traj;
    if (event) {
        lifsim::EventOptions eo;
        eo.noise = &store;
        eo.noise_factor = factor;
        traj = lifsim::event_simulate(net, horizon, eo);
    } else {
        lifsim::SimulationOptions so;
        so.snapshot_stride = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(1.0 / h / 16.0)));
        traj = lifsim::simulate(net, h, horizon, store, factor, so);
    }
    const std::filesystem::path dir(cfg.output);
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "trajectory.csv");
        lifsim::write_trajectory_csv(os, traj);
    }
    {
        std::ofstream os(dir / "spikes.csv");
        lifsim::write_spikes_csv(os, traj);
    }
    auto m = lifsim::manifest(cfg, "simulate", 1);
    m["h"] = h;
    m["horizon"] = horizon;
    m["scheme"] = event ? "event" : "em-grid";
    m["degenerate_crossings"] = traj.degenerate.size();
    std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
    std::cout << "wrote " << dir.string() << '\n';
    return exit_ok;
}

int cmd_strong(const Common& c) {
    const auto cfg = resolve(c, true);
    const auto result = lifsim::run_strong_experiment(cfg, cfg.strong_depths, run_options(c));
    lifsim::write_strong_outputs(cfg.output, cfg, result);
    std::cout << "wrote " << cfg.output << " (" << result.n_samples << " samples)\n";
    if (!result.pool_ok) {
        std::cerr << "error: " << result.pool_message << '\n';
        return exit_pool;
    }
    return exit_ok;
}

int cmd_weak(const Common& c) {
    const auto cfg = resolve(c, true);
    const auto result = lifsim::run_weak_experiment(cfg, cfg.weak_depths, run_options(c));
    lifsim::write_weak_outputs(cfg.output, cfg, result);
    std::cout << "wrote " << cfg.output << " (" << result.n_samples << " samples)\n";
    return exit_ok;
}

int cmd_lyapunov(const Common& c) {
    const auto cfg = resolve(c, false);
    const auto report = lifsim::run_lyapunov_experiment(cfg, run_options(c));
    lifsim::write_lyapunov_outputs(cfg.output, cfg, report);
    std::cout << report.dump(2) << '\n';
    return exit_ok;
}

int cmd_calibrate(const Common& c, const lifsim::CalibrationOptions& opts) {
    const auto cfg = resolve(c, false);
    const auto result = lifsim::calibrate_drives(cfg, opts, run_options(c));
    nlohmann::json out = {{"target_rate", opts.target_rate}, {"drives", result.drives}, {"rates", result.rates}};
    std::cout << out.dump(2) << '\n';
    return exit_ok;
}

int cmd_oracle(const lifsim::CatchupProblem& problem, double i0) {
    const auto r = lifsim::catchup_first_passage_mc(problem);
    nlohmann::json out = {{"catchup",
                           {{"d", problem.d},
                            {"a", problem.a},
                            {"sigma", problem.sigma},
                            {"m1", r.m1},
                            {"m1_std_error", r.m1_std_error},
                            {"m2", r.m2},
                            {"m2_std_error", r.m2_std_error},
                            {"d_over_a", problem.d / problem.a},
                            {"n_used", r.n_used},
                            {"n_censored", r.n_censored}}}};
    lifsim::NeuronParams p;
    p.tau_v = problem.tau_v;
    out["spike_time"] = {{"i0", i0}, {"time", lifsim::closed_form_spike_time(i0, p)}};
    std::cout << out.dump(2) << '\n';
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and numerical-error harness for leaky integrate-and-fire networks"};
    app.set_version_flag("--version", lifsim::version());
    app.require_subcommand(1);

    Common common;
    double sim_h = 0.0;
    double sim_horizon = 0.0;
    bool sim_event = false;
    auto* simulate = app.add_subcommand("simulate", "Run one trajectory and write trajectory/spike CSV files");
    add_common(simulate, common);
    simulate->add_option("--step", sim_h, "Step size (default: grid.h_ref)");
    simulate->add_option("--horizon", sim_horizon, "Horizon (default: last checkpoint)");
    simulate->add_flag("--event", sim_event, "Use the event-resolved integrator with noise kicks");

    auto* strong = app.add_subcommand("strong", "Matched strong-error study");
    add_common(strong, common);
    auto* weak = app.add_subcommand("weak", "Paired weak-error study");
    add_common(weak, common);
    auto* lyap = app.add_subcommand("lyapunov", "Flux, two-copy, and hybrid exponent report");
    add_common(lyap, common);

    lifsim::CalibrationOptions cal;
    auto* calibrate = app.add_subcommand("calibrate", "Propose per-layer drives hitting a target firing rate");
    add_common(calibrate, common);
    calibrate->add_option("--target-rate", cal.target_rate, "Spikes per neuron per unit time");
    calibrate->add_option("--horizon", cal.horizon, "Pilot horizon");
    calibrate->add_option("--samples", cal.samples, "Pilot samples");

    lifsim::CatchupProblem problem;
    problem.n_samples = 10000;
    double i0 = 2.0;
    auto* oracle = app.add_subcommand("oracle", "Catch-up Monte Carlo and closed-form spike time");
    oracle->add_option("--d", problem.d, "Initial gap");
    oracle->add_option("--a", problem.a, "Crossing speed");
    oracle->add_option("--sigma", problem.sigma, "Noise amplitude");
    oracle->add_option("--tau-v", problem.tau_v, "Membrane time constant");
    oracle->add_option("--tau-c", problem.tau_c, "Synaptic time constant");
    oracle->add_option("--samples", problem.n_samples, "Monte Carlo samples");
    oracle->add_option("--seed", problem.seed, "Seed");
    oracle->add_option("--i0", i0, "Constant current for the closed-form spike time");

    std::string show;
    auto* preset = app.add_subcommand("preset", "Print a preset configuration");
    preset->add_option("--show", show, "Preset name (base, strong-coupling)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim_h, sim_horizon, sim_event);
        if (*strong) return cmd_strong(common);
        if (*weak) return cmd_weak(common);
        if (*lyap) return cmd_lyapunov(common);
        if (*calibrate) return cmd_calibrate(common, cal);
        if (*oracle) return cmd_oracle(problem, i0);
        if (*preset) {
            std::cout << lifsim::to_json(lifsim::preset(show)).dump(2) << '\n';
            return exit_ok;
        }
    } catch (const lifsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const lifsim::InsufficientPoolError& e) {
        std::cerr << "pool error: " << e.what() << '\n';
        return exit_pool;
    } catch (const lifsim::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}
