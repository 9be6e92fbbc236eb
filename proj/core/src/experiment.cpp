#include "lifsim/experiment.hpp"

#include "lifsim/engine.hpp"
#include "lifsim/errors.hpp"
#include "lifsim/paths.hpp"
#include "lifsim/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#ifndef LIFSIM_VERSION
#define LIFSIM_VERSION "0.0.0"
#endif

namespace lifsim {

const char* version() { return LIFSIM_VERSION; }

int default_worker_count() {
    if (const char* env = std::getenv("LIFSIM_WORKERS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    workers = static_cast<int>(std::clamp<std::int64_t>(workers, 1, n));
    if (workers == 1) {
        for (std::int64_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&]() {
        while (!failed.load()) {
            const std::int64_t k = next.fetch_add(1);
            if (k >= n) break;
            try {
                fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

struct Ladder {
    std::vector<int> factors;  ///< factors[0] = 1 (reference), then one per coarse h
    std::vector<double> h;     ///< coarse step sizes, same order as factors[1..]
    SnappedTimes times;
    double horizon = 0.0;
};

Ladder make_ladder(const ScenarioConfig& cfg) {
    Ladder out;
    out.factors.push_back(1);
    double coarsest = cfg.grid.h_ref;
    for (double h : cfg.grid.h) {
        out.factors.push_back(static_cast<int>(std::llround(h / cfg.grid.h_ref)));
        out.h.push_back(h);
        coarsest = std::max(coarsest, h);
    }
    // Snapping to the coarsest step keeps every checkpoint on every grid of the ladder.
    out.times = snap_times(cfg.grid.checkpoints, coarsest);
    out.horizon = out.times.snapped.back();
    return out;
}

Eigen::VectorXd prefix_state(const Snapshot& s, LayerRange r) {
    Eigen::VectorXd x(2 * r.size());
    x << s.v.segment(r.begin, r.size()), s.i.segment(r.begin, r.size());
    return x;
}

std::vector<TrajectoryRecord> run_sample(const NetworkSpec& net, const ScenarioConfig& cfg, const Ladder& ladder,
                                         std::int64_t sample) {
    const auto n_fine = static_cast<std::int64_t>(std::llround(ladder.horizon / cfg.grid.h_ref));
    BrownianStore store(derive_seed(cfg.seed, static_cast<std::uint64_t>(sample)), cfg.grid.h_ref, n_fine,
                        static_cast<int>(net.size()));
    SimulationOptions opts;
    opts.checkpoints = ladder.times.snapped;
    return simulate_ladder(net, store, ladder.factors, ladder.horizon, opts);
}

struct StrongSampleOut {
    std::vector<StrongRecord> records;
    double reference_spikes = 0.0;          ///< per monitored neuron
    std::vector<double> slow_crossings;     ///< per monitored neuron, per coarse h
};

StrongSampleOut strong_sample(const NetworkSpec& net, const ScenarioConfig& cfg, const Ladder& ladder,
                              const std::vector<int>& depths, std::int64_t sample) {
    const auto runs = run_sample(net, cfg, ladder, sample);
    const auto& ref = runs.front();
    StrongSampleOut out;
    const double tau_c = cfg.network.tau_c;
    for (std::size_t c = 1; c < runs.size(); ++c) {
        const auto& coarse = runs[c];
        for (int depth : depths) {
            const LayerRange r = net.prefix_range(depth);
            const auto len = static_cast<std::size_t>(r.size());
            const std::span<const SpikeTrain> ref_trains(ref.spikes.data() + r.begin, len);
            const std::span<const SpikeTrain> num_trains(coarse.spikes.data() + r.begin, len);
            for (double T : ladder.times.snapped) {
                StrongRecord rec;
                rec.sample = sample;
                rec.h = ladder.h[c - 1];
                rec.depth = depth;
                rec.T = T;
                const auto match = match_network(ref_trains, num_trains, T);
                rec.matched = match.network_matched;
                rec.squared_gap = squared_gap(prefix_state(*coarse.at(T), r), prefix_state(*ref.at(T), r));
                rec.impact = spike_impact(match, tau_c);
                out.records.push_back(rec);
            }
        }
    }
    const int max_depth = *std::max_element(depths.begin(), depths.end());
    const LayerRange mon = net.prefix_range(max_depth);
    const double i_th = (cfg.network.v_th - cfg.network.v_r) / cfg.network.tau_v;
    std::int64_t total = 0;
    out.slow_crossings.assign(ladder.h.size(), 0.0);
    for (Eigen::Index p = mon.begin; p < mon.end; ++p) {
        const auto& train = ref.spikes[static_cast<std::size_t>(p)];
        total += static_cast<std::int64_t>(train.times.size());
        for (std::size_t c = 0; c < ladder.h.size(); ++c) {
            const double root = std::sqrt(ladder.h[c]);
            for (double a : train.speeds)
                if (a >= 0.5 * root * i_th && a <= 2.0 * root * i_th) out.slow_crossings[c] += 1.0;
        }
    }
    out.reference_spikes = static_cast<double>(total) / static_cast<double>(mon.size());
    for (auto& s : out.slow_crossings) s /= static_cast<double>(mon.size());
    return out;
}

using CellKey = std::tuple<double, int, double>;

}  // namespace

StrongExperimentResult run_strong_experiment(const ScenarioConfig& cfg, const std::vector<int>& depths,
                                             const RunOptions& options) {
    cfg.validate(true);
    if (depths.empty()) throw ConfigError("depths.strong", "at least one depth required");
    for (int d : depths)
        if (d < 1 || d > cfg.network.depth) throw ConfigError("depths.strong", "depth outside the network");
    const NetworkSpec net = build_network(cfg);
    const Ladder ladder = make_ladder(cfg);

    StrongExperimentResult out;
    out.times = ladder.times;
    std::vector<StrongSampleOut> samples;
    std::int64_t target = cfg.pools.strong_min;
    std::map<CellKey, std::int64_t> matched;
    while (true) {
        const auto done = static_cast<std::int64_t>(samples.size());
        samples.resize(static_cast<std::size_t>(target));
        parallel_for(target - done, options.workers, [&](std::int64_t k) {
            samples[static_cast<std::size_t>(done + k)] = strong_sample(net, cfg, ladder, depths, done + k);
        });
        matched.clear();
        for (const auto& s : samples)
            for (const auto& r : s.records) matched[{r.h, r.depth, r.T}] += r.matched ? 1 : 0;
        std::int64_t worst = std::numeric_limits<std::int64_t>::max();
        for (const auto& [key, m] : matched) worst = std::min(worst, m);
        if (worst >= cfg.pools.matched_floor) break;
        if (target >= cfg.pools.strong_max) {
            out.pool_ok = false;
            out.pool_message = "matched pool floor " + std::to_string(cfg.pools.matched_floor) + " not reached: " +
                               "smallest cell has " + std::to_string(worst) + " matched of " +
                               std::to_string(target) + " samples";
            break;
        }
        target = std::min(cfg.pools.strong_max, target + cfg.pools.batch);
    }
    out.n_samples = static_cast<std::int64_t>(samples.size());

    std::map<CellKey, std::vector<double>> gaps, impacts;
    std::map<CellKey, std::int64_t> mismatches;
    out.mean_slow_crossings.assign(ladder.h.size(), 0.0);
    for (const auto& s : samples) {
        for (const auto& r : s.records) {
            out.raw.push_back(r);
            const CellKey key{r.h, r.depth, r.T};
            if (r.matched) {
                gaps[key].push_back(r.squared_gap);
                impacts[key].push_back(r.impact);
            } else {
                ++mismatches[key];
            }
        }
        out.mean_reference_spikes += s.reference_spikes;
        for (std::size_t c = 0; c < ladder.h.size(); ++c) out.mean_slow_crossings[c] += s.slow_crossings[c];
    }
    const auto n = static_cast<double>(out.n_samples);
    out.mean_reference_spikes /= n;
    for (auto& v : out.mean_slow_crossings) v /= n;

    for (int depth : depths) {
        for (double T : ladder.times.snapped) {
            std::vector<double> hs, mses;
            for (double h : ladder.h) {
                const CellKey key{h, depth, T};
                const auto& g = gaps[key];
                const auto n_matched = static_cast<std::int64_t>(g.size());
                out.summary.add(h, depth, T, "n_matched", static_cast<double>(n_matched));
                out.summary.add(h, depth, T, "matched_fraction", static_cast<double>(n_matched) / n);
                const auto mis = wilson_interval(mismatches[key], out.n_samples);
                out.summary.add(h, depth, T, "mismatch_probability", mis.estimate,
                                std::sqrt(mis.estimate * (1.0 - mis.estimate) / n));
                out.summary.add(h, depth, T, "mismatch_lower", mis.lower);
                out.summary.add(h, depth, T, "mismatch_upper", mis.upper);
                if (n_matched >= 2) {
                    const auto m = mean_estimate(g);
                    const auto im = mean_estimate(impacts[key]);
                    out.summary.add(h, depth, T, "mse", m.mean, m.std_error);
                    out.summary.add(h, depth, T, "mse_over_h", m.mean / h, m.std_error / h);
                    out.summary.add(h, depth, T, "impact", im.mean, im.std_error);
                    if (m.mean > 0.0) {
                        hs.push_back(h);
                        mses.push_back(m.mean);
                    }
                }
            }
            if (hs.size() >= 3) {
                const auto fit = fit_order(hs, mses);
                out.summary.add(0.0, depth, T, "mse_slope", fit.slope, fit.slope_std_error);
                out.summary.add(0.0, depth, T, "polylog_ratio_monotone", polylog_ratio_test(hs, mses, depth) ? 1.0 : 0.0);
            }
        }
    }
    return out;
}

WeakExperimentResult run_weak_experiment(const ScenarioConfig& cfg, const std::vector<int>& depths,
                                         const RunOptions& options) {
    cfg.validate(true);
    if (depths.empty()) throw ConfigError("depths.weak", "at least one depth required");
    for (int d : depths)
        if (d < 1 || d > cfg.network.depth) throw ConfigError("depths.weak", "depth outside the network");
    const NetworkSpec net = build_network(cfg);
    const Ladder ladder = make_ladder(cfg);

    WeakExperimentResult out;
    out.times = ladder.times;
    std::vector<std::vector<WeakRecord>> samples;
    std::int64_t target = cfg.pools.weak_min;
    auto cell_pairs = [&]() {
        std::map<CellKey, std::vector<std::pair<double, double>>> cells;
        for (const auto& s : samples)
            for (const auto& r : s) cells[{r.h, r.depth, r.T}].emplace_back(r.coarse, r.reference);
        return cells;
    };
    while (true) {
        const auto done = static_cast<std::int64_t>(samples.size());
        samples.resize(static_cast<std::size_t>(target));
        parallel_for(target - done, options.workers, [&](std::int64_t k) {
            const std::int64_t sample = done + k;
            const auto runs = run_sample(net, cfg, ladder, sample);
            std::vector<WeakRecord> recs;
            for (std::size_t c = 1; c < runs.size(); ++c)
                for (int depth : depths)
                    for (double T : ladder.times.snapped) {
                        const LayerRange layer = net.layer_range(depth - 1);
                        recs.push_back({sample, ladder.h[c - 1], depth, T,
                                        readout_observable(runs[c], layer, cfg.observable, T),
                                        readout_observable(runs.front(), layer, cfg.observable, T)});
                    }
            samples[static_cast<std::size_t>(sample)] = std::move(recs);
        });
        if (target >= cfg.pools.weak_max) break;
        bool resolved = true;
        for (const auto& [key, pairs] : cell_pairs()) {
            const auto b = weak_bias(pairs);
            if (std::abs(b.mean) < 2.0 * b.std_error) resolved = false;
        }
        if (resolved) break;
        target = std::min(cfg.pools.weak_max, target + cfg.pools.batch);
    }
    out.n_samples = static_cast<std::int64_t>(samples.size());
    for (const auto& s : samples) out.raw.insert(out.raw.end(), s.begin(), s.end());

    auto cells = cell_pairs();
    for (int depth : depths) {
        for (double T : ladder.times.snapped) {
            std::vector<double> hs, biases;
            for (double h : ladder.h) {
                const auto b = weak_bias(cells[{h, depth, T}]);
                out.summary.add(h, depth, T, "bias", b.mean, b.std_error);
                out.summary.add(h, depth, T, "abs_bias", std::abs(b.mean), b.std_error);
                if (b.mean != 0.0) {
                    hs.push_back(h);
                    biases.push_back(std::abs(b.mean));
                }
            }
            if (hs.size() >= 3) {
                const auto fit = fit_order(hs, biases);
                out.summary.add(0.0, depth, T, "bias_slope", fit.slope, fit.slope_std_error);
            }
        }
    }
    return out;
}

namespace {

NeuronParams single_neuron(const ScenarioConfig& cfg, double drive, double sigma) {
    NeuronParams p;
    p.tau_v = cfg.network.tau_v;
    p.tau_c = cfg.network.tau_c;
    p.v_th = cfg.network.v_th;
    p.v_r = cfg.network.v_r;
    p.sigma = sigma;
    p.drive.level = drive;
    return p;
}

NetworkSpec lone(const NeuronParams& p) { return build_recurrent({p}, Eigen::MatrixXd::Zero(1, 1)); }

}  // namespace

nlohmann::json run_lyapunov_experiment(const ScenarioConfig& cfg, const RunOptions& options) {
    cfg.validate(false);
    const auto& ly = cfg.lyapunov;
    const double i_th = (cfg.network.v_th - cfg.network.v_r) / cfg.network.tau_v;
    nlohmann::json report;

    {
        const NetworkSpec net = lone(single_neuron(cfg, ly.constant_current * i_th, 0.0));
        LambdaOptions lo;
        lo.renorm_interval = ly.renorm_interval;
        const auto hyb = lambda_hyb_estimate(net, ly.horizon, lo);
        TwoCopyOptions tc;
        tc.horizon = ly.horizon;
        tc.seed = cfg.seed;
        tc.renorm_interval = ly.renorm_interval;
        const auto two = two_copy_divergence(net, tc);
        report["constant_input"] = {{"current", ly.constant_current * i_th},
                                    {"lambda_hyb", hyb.lambda},
                                    {"upper_bound", hyb.upper_bound},
                                    {"rate", hyb.rate},
                                    {"kappa_s", hyb.kappa_s},
                                    {"two_copy_lambda", two.exponent},
                                    {"two_copy_std_error", two.exponent_std_error}};
    }
    {
        ScenarioConfig quiet = cfg;
        quiet.network.sigma = 0.0;
        quiet.network.drives = std::vector<double>{0.0};
        const NetworkSpec net = build_network(quiet);
        LambdaOptions lo;
        lo.renorm_interval = ly.renorm_interval;
        const auto hyb = lambda_hyb_estimate(net, ly.horizon, lo);
        report["subthreshold"] = {{"lambda_hyb", hyb.lambda},
                                  {"spectral_abscissa", spectral_abscissa(net)},
                                  {"n_events", hyb.n_events}};
    }
    {
        const NeuronParams p = single_neuron(cfg, ly.noisy_drive * i_th, cfg.network.sigma);
        const NetworkSpec net = lone(p);
        const double h_fine = cfg.grid.h_ref;
        const auto n_fine = static_cast<std::int64_t>(std::ceil(ly.horizon / h_fine));
        std::vector<double> flux_lambda(static_cast<std::size_t>(ly.flux_trains));
        std::vector<FluxHistogram> hists(static_cast<std::size_t>(ly.flux_trains), FluxHistogram::geometric(i_th));
        parallel_for(ly.flux_trains, options.workers, [&](std::int64_t k) {
            BrownianStore store(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)), h_fine, n_fine, 1);
            EventOptions eo;
            eo.noise = &store;
            const auto traj = event_simulate(net, static_cast<double>(n_fine) * h_fine, eo);
            auto& hist = hists[static_cast<std::size_t>(k)];
            hist.add_trains(traj.spikes, traj.horizon);
            flux_lambda[static_cast<std::size_t>(k)] = lambda_from_flux(hist, p.tau_v, i_th);
        });
        FluxHistogram pooled = FluxHistogram::geometric(i_th);
        for (const auto& h : hists) pooled.merge(h);
        const auto fl = mean_estimate(flux_lambda);

        std::vector<double> two(static_cast<std::size_t>(ly.two_copy_runs));
        parallel_for(ly.two_copy_runs, options.workers, [&](std::int64_t k) {
            TwoCopyOptions tc;
            tc.seed = derive_seed(cfg.seed ^ 0x7C0FFEEULL, static_cast<std::uint64_t>(k));
            tc.horizon = ly.horizon;
            tc.h_fine = h_fine;
            tc.renorm_interval = ly.renorm_interval;
            two[static_cast<std::size_t>(k)] = two_copy_divergence(net, tc).exponent;
        });
        const auto tc = mean_estimate(two);
        report["noisy"] = {{"drive", p.drive.level},
                           {"sigma", p.sigma},
                           {"flux_lambda", lambda_from_flux(pooled, p.tau_v, i_th)},
                           {"flux_lambda_std_error", fl.std_error},
                           {"flux_overflow", pooled.overflow()},
                           {"two_copy_lambda", tc.mean},
                           {"two_copy_std_error", tc.std_error}};
    }
    report["norm"] = "exponents use the max-row-sum norm; the bound uses tau_max and the observed rate";
    return report;
}

CalibrationResult calibrate_drives(const ScenarioConfig& cfg, const CalibrationOptions& options, const RunOptions& run) {
    cfg.validate(false);
    if (!(options.target_rate > 0.0) || !(options.horizon > 0.0) || options.samples < 1 || !(options.h > 0.0))
        throw std::invalid_argument("invalid calibration options");
    const double i_th = (cfg.network.v_th - cfg.network.v_r) / cfg.network.tau_v;
    CalibrationResult out;
    const auto n_steps = static_cast<std::int64_t>(std::ceil(options.horizon / options.h));
    const double horizon = static_cast<double>(n_steps) * options.h;
    for (int layer = 1; layer <= cfg.network.depth; ++layer) {
        ScenarioConfig trial = cfg;
        trial.network.depth = layer;
        trial.strong_depths = {layer};
        trial.weak_depths = {layer};
        auto rate_at = [&](double b) {
            std::vector<double> drives = out.drives;
            drives.push_back(b);
            trial.network.drives = drives;
            const NetworkSpec net = build_network(trial);
            const LayerRange r = net.layer_range(layer - 1);
            std::vector<double> rates(static_cast<std::size_t>(options.samples));
            parallel_for(options.samples, run.workers, [&](std::int64_t k) {
                BrownianStore store(derive_seed(cfg.seed ^ 0xCA11B7A7EULL, static_cast<std::uint64_t>(k)), options.h,
                                    n_steps, static_cast<int>(net.size()));
                const auto traj = simulate(net, options.h, horizon, store, 1);
                std::int64_t count = 0;
                for (Eigen::Index p = r.begin; p < r.end; ++p)
                    count += static_cast<std::int64_t>(traj.spikes[static_cast<std::size_t>(p)].times.size());
                rates[static_cast<std::size_t>(k)] = static_cast<double>(count) / static_cast<double>(r.size()) / horizon;
            });
            double mean = 0.0;
            for (double x : rates) mean += x;
            return mean / static_cast<double>(rates.size());
        };
        double lo = -2.0 * i_th;
        double hi = 2.0 * i_th;
        while (rate_at(hi) < options.target_rate) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e4 * i_th) throw NumericalError("calibration could not reach the target rate");
        }
        for (int it = 0; it < options.iterations; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (rate_at(mid) < options.target_rate) lo = mid;
            else hi = mid;
        }
        const double b = 0.5 * (lo + hi);
        out.rates.push_back(rate_at(b));
        out.drives.push_back(b);
    }
    return out;
}

}  // namespace lifsim
