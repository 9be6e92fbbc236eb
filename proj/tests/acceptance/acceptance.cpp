// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero only when a criterion
// could not be evaluated (an exception escaped), or with --strict when any criterion fails.

#include "lifsim/analysis.hpp"
#include "lifsim/config.hpp"
#include "lifsim/engine.hpp"
#include "lifsim/errors.hpp"
#include "lifsim/experiment.hpp"
#include "lifsim/lyapunov.hpp"
#include "lifsim/model.hpp"
#include "lifsim/oracle.hpp"
#include "lifsim/paths.hpp"
#include "lifsim/random.hpp"
#include "lifsim/spikes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lifsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::vector<int> kFactors{32, 16, 8, 4, 2};  // h = 2^-5 .. 2^-9 over h_ref = 2^-10
constexpr double kHref = 1.0 / 1024.0;

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

NetworkSpec lone(double b, double sigma = 0.0, double tau_c = 0.2) {
    NeuronParams p;
    p.drive.level = b;
    p.sigma = sigma;
    p.tau_c = tau_c;
    return build_recurrent({p}, Eigen::MatrixXd::Zero(1, 1));
}

ScenarioConfig toy_config() {
    ScenarioConfig cfg = preset("base");
    cfg.network.depth = 3;
    cfg.network.width = 8;
    cfg.network.n_exc = 6;
    cfg.network.n_inh = 2;
    cfg.network.drives = std::vector<double>{1.2};
    cfg.grid.checkpoints = {10.0};
    cfg.strong_depths = {1, 2, 3};
    cfg.weak_depths = {1, 2, 3};
    return cfg;
}

NetworkSpec three_neuron_recurrent() {
    std::vector<NeuronParams> params(3);
    params[0].drive.level = 1.6;
    params[1].drive.level = 1.9;
    params[2].drive.level = 2.3;
    params[1].tau_c = 0.3;
    params[2].tau_v = 0.8;
    Eigen::MatrixXd w(3, 3);
    w << 0.0, 0.15, -0.1, 0.2, 0.0, 0.1, -0.12, 0.18, 0.0;
    return build_recurrent(params, w);
}

Outcome spike_time_consistency() {
    const auto net = lone(2.0);
    const double exact = std::log(2.0);
    const auto ev = deterministic_event_simulate(net, 1.0);
    const double event_error = std::abs(ev.spikes[0].times.at(0) - exact);

    const BrownianStore store(1, kHref, 1024, 1);
    const auto ladder = simulate_ladder(net, store, kFactors, 1.0);
    std::vector<double> hs, errs;
    for (std::size_t k = 0; k < kFactors.size(); ++k) {
        hs.push_back(ladder[k].h);
        errs.push_back(std::abs(ladder[k].spikes[0].times.at(0) - exact));
    }
    const auto fit = fit_order(hs, errs);
    Outcome o;
    o.pass = event_error < 1e-10 && std::abs(fit.slope - 1.0) <= 0.2;
    o.detail = "event |error| " + fmt("%.2e", event_error) + ", EM slope " + fmt("%.3f", fit.slope);
    return o;
}

std::string depth_row(const ErrorSummary& s, const char* metric, int depth, double T) {
    std::string out;
    const auto* r = s.find(0.0, depth, T, metric);
    if (r) out = fmt("%.3f", r->value) + "+-" + fmt("%.3f", r->std_error);
    return out;
}

Outcome strong_order(int workers) {
    const auto cfg = toy_config();
    const auto res = run_strong_experiment(cfg, cfg.strong_depths, RunOptions{workers});
    const double T = 10.0;
    const auto* slope = res.summary.find(0.0, 3, T, "mse_slope");
    const auto* poly = res.summary.find(0.0, 3, T, "polylog_ratio_monotone");
    double min_matched = 1e300;
    for (double h : cfg.grid.h) min_matched = std::min(min_matched, res.summary.find(h, 3, T, "n_matched")->value);
    Outcome o;
    o.pass = res.pool_ok && slope && poly && slope->value >= 0.8 && slope->value <= 1.3 && poly->value == 1.0 &&
             min_matched >= 400;
    o.detail = "depth 3 slope " + depth_row(res.summary, "mse_slope", 3, T) + ", polylog monotone " +
               (poly && poly->value == 1.0 ? "yes" : "no") + ", min matched " + fmt("%.0f", min_matched) + " of " +
               std::to_string(res.n_samples) + " (depth 1: " + depth_row(res.summary, "mse_slope", 1, T) +
               ", depth 2: " + depth_row(res.summary, "mse_slope", 2, T) + ")";
    return o;
}

Outcome weak_order(int workers) {
    const auto cfg = toy_config();
    const auto res = run_weak_experiment(cfg, cfg.weak_depths, RunOptions{workers});
    const double T = 10.0;
    const auto* slope = res.summary.find(0.0, 3, T, "bias_slope");
    Outcome o;
    o.pass = slope && slope->value >= 0.8 && slope->value <= 1.2 && res.n_samples >= 500;
    std::string biases;
    for (double h : cfg.grid.h) {
        const auto* b = res.summary.find(h, 3, T, "abs_bias");
        biases += (biases.empty() ? "" : " ") + fmt("%.2e", b->value);
    }
    o.detail = "depth 3 slope " + depth_row(res.summary, "bias_slope", 3, T) + " on " +
               std::to_string(res.n_samples) + " pairs, |bias| " + biases + " (depth 1: " +
               depth_row(res.summary, "bias_slope", 1, T) + ", depth 2: " +
               depth_row(res.summary, "bias_slope", 2, T) + ")";
    return o;
}

Outcome mismatch_scaling() {
    // Event-resolved reference driven by the same fine path.
    const auto net = lone(1.0, 0.25);
    const double T = 10.0;
    const int n = 10000;
    std::vector<std::int64_t> mis(kFactors.size(), 0);
    for (int s = 0; s < n; ++s) {
        const BrownianStore store(derive_seed(4, static_cast<std::uint64_t>(s)), kHref, 10 * 1024, 1);
        const auto ladder = simulate_ladder(net, store, kFactors, T);
        EventOptions eo;
        eo.noise = &store;
        const auto ref = event_simulate(net, T, eo);
        for (std::size_t k = 0; k < kFactors.size(); ++k)
            if (!match_trains(ref.spikes[0], ladder[k].spikes[0], T).matched) ++mis[k];
    }
    std::vector<double> hs, ps;
    bool decreasing = true;
    std::string probs;
    for (std::size_t k = 0; k < kFactors.size(); ++k) {
        hs.push_back(kFactors[k] * kHref);
        ps.push_back(static_cast<double>(mis[k]) / n);
        if (k > 0 && !(ps[k] < ps[k - 1])) decreasing = false;
        probs += (probs.empty() ? "" : " ") + fmt("%.4f", ps[k]);
    }
    const auto fit = fit_order(hs, ps);
    Outcome o;
    o.pass = decreasing && fit.slope >= 0.35 && fit.slope <= 0.75;
    o.detail = "P(mismatch) " + probs + ", slope " + fmt("%.3f", fit.slope) + "+-" + fmt("%.3f", fit.slope_std_error) +
               " on " + std::to_string(n) + " paths";
    return o;
}

Outcome catchup() {
    Outcome o;
    o.pass = true;
    for (double a : {0.5, 1.0, 2.0}) {
        CatchupProblem p;
        p.d = 0.01;
        p.a = a;
        p.sigma = 0.25;
        p.tau_v = 1.0;
        p.tau_c = 1.0;
        p.n_samples = 100000;
        const auto r = catchup_first_passage_mc(p);
        const double s = p.d / a;
        const double e1 = std::abs(r.m1 / s - 1.0);
        const double e2 = std::abs(r.m2 / (s * s) - 1.0);
        o.pass = o.pass && e1 < 0.05 && e2 < 0.10;
        o.detail += (o.detail.empty() ? "" : ", ") + fmt("a=%.1f:", a) + " m1 " + fmt("%+.2f%%", 100 * (r.m1 / s - 1.0)) +
                    " m2 " + fmt("%+.2f%%", 100 * (r.m2 / (s * s) - 1.0));
    }
    return o;
}

Outcome neutrality() {
    const auto net = lone(2.0);
    const auto hyb = lambda_hyb_estimate(net, 100.0);
    TwoCopyOptions tc;
    tc.horizon = 100.0;
    const auto two = two_copy_divergence(net, tc);

    auto cfg = toy_config();
    cfg.network.sigma = 0.0;
    cfg.network.drives = std::vector<double>{0.5};
    const auto quiet = build_network(cfg);
    const auto sub = lambda_hyb_estimate(quiet, 50.0);
    const double target = spectral_abscissa(quiet);
    Outcome o;
    o.pass = std::abs(hyb.lambda) < 1e-6 && std::abs(two.exponent) < 1e-3 && sub.n_events == 0 &&
             std::abs(sub.lambda - target) < 1e-9;
    o.detail = "hybrid " + fmt("%.2e", hyb.lambda) + ", two-copy " + fmt("%.2e", two.exponent) +
               ", subthreshold " + fmt("%.12f", sub.lambda) + " vs " + fmt("%.12f", target);
    return o;
}

Outcome saltation_fidelity() {
    const auto net = three_neuron_recurrent();
    const double T = 3.3;
    Eigen::VectorXd x0(6);
    x0 << 0.1, 0.35, 0.6, 1.6, 1.9, 2.3;
    auto run = [&](const Eigen::VectorXd& x) {
        EventOptions eo;
        NetworkState s = resting_state(net);
        s.v = x.head(3);
        s.i = x.tail(3);
        eo.initial = s;
        return deterministic_event_simulate(net, T, 1e-14, eo);
    };
    auto spikes = [](const TrajectoryRecord& r) {
        std::size_t k = 0;
        for (const auto& s : r.spikes) k += s.times.size();
        return k;
    };
    const auto base = run(x0);
    const auto hv = hybrid_fundamental_matrix(base, net);
    const Eigen::MatrixXd jac = std::exp(hv.log_scale()) * hv.phi();
    Eigen::MatrixXd fd(6, 6);
    bool same_events = base.degenerate.empty();
    const double eps = 1e-6;
    for (int c = 0; c < 6; ++c) {
        Eigen::VectorXd xp = x0, xm = x0;
        xp[c] += eps;
        xm[c] -= eps;
        const auto tp = run(xp);
        const auto tm = run(xm);
        same_events = same_events && spikes(tp) == spikes(base) && spikes(tm) == spikes(base);
        Eigen::VectorXd yp(6), ym(6);
        yp << tp.terminal().v, tp.terminal().i;
        ym << tm.terminal().v, tm.terminal().i;
        fd.col(c) = (yp - ym) / (2.0 * eps);
    }
    const double rel = (fd - jac).cwiseAbs().maxCoeff() / std::max(1.0, jac.cwiseAbs().maxCoeff());

    bool scalar_exact = true;
    const auto single = lone(1.5);
    std::mt19937_64 rng(5);
    for (int k = 0; k < 1000; ++k) {
        const double i = 1.0 + 1e-6 + 10.0 * uniform01(rng);
        scalar_exact = scalar_exact && saltation_matrix(single, 0, i)(0, 0) == i / (i - 1.0);
    }
    Outcome o;
    o.pass = same_events && rel < 1e-3 && scalar_exact;
    o.detail = std::to_string(spikes(base)) + " events, max relative deviation " + fmt("%.2e", rel) +
               ", scalar reduction " + (scalar_exact ? "exact" : "inexact");
    return o;
}

Outcome flux_identity() {
    const auto net = lone(1.0, 0.25);
    const double T = 20.0;
    const int trains = 200;
    auto run = [&](std::uint64_t seed) {
        const BrownianStore store(seed, kHref, 20 * 1024, 1);
        EventOptions eo;
        eo.noise = &store;
        return event_simulate(net, T, eo).spikes.front();
    };
    std::vector<SpikeTrain> direct_set, hist_set;
    for (int k = 0; k < trains; ++k) {
        direct_set.push_back(run(derive_seed(81, static_cast<std::uint64_t>(k))));
        hist_set.push_back(run(derive_seed(82, static_cast<std::uint64_t>(k))));
    }
    const std::vector<std::pair<std::string, std::function<double(double)>>> phis{
        {"1", [](double) { return 1.0; }},
        {"a", [](double a) { return a; }},
        {"min(1,1/a^2)", [](double a) { return std::min(1.0, 1.0 / (a * a)); }}};
    Outcome o;
    o.pass = true;
    for (const auto& [name, phi] : phis) {
        std::vector<double> direct, binned;
        for (const auto& s : direct_set) {
            double acc = 0.0;
            for (double a : s.speeds) acc += phi(a);
            direct.push_back(acc / T);
        }
        for (const auto& s : hist_set) {
            FluxHistogram h = FluxHistogram::geometric(1.0);
            h.add_train(s, T);
            binned.push_back(histogram_integral(h, phi));
        }
        const auto d = mean_estimate(direct);
        const auto g = mean_estimate(binned);
        const double z = std::abs(d.mean - g.mean) / std::hypot(d.std_error, g.std_error);
        o.pass = o.pass && z <= 3.0;
        o.detail += (o.detail.empty() ? "phi=" : ", phi=") + name + " " + fmt("%.4f", d.mean) + " vs " +
                    fmt("%.4f", g.mean) + " (" + fmt("%.2f", z) + " SE)";
    }
    return o;
}

Outcome structural_invariants() {
    std::vector<std::string> failed;
    // Coupling: coarse increments are bitwise block sums, and ladder runs equal solo runs.
    {
        const BrownianStore store(17, kHref, 4096, 2);
        bool ok = true;
        for (int factor : kFactors) {
            const auto fine = store.fine_increments(1, 0, 4096);
            for (std::int64_t c = 0; c < 4096 / factor; ++c) {
                double acc = 0.0;
                for (int j = 0; j < factor; ++j) acc += fine[static_cast<std::size_t>(c * factor + j)];
                ok = ok && store.coarsen(factor, 1, c) == acc;
            }
        }
        const auto cfg = toy_config();
        const auto net = build_network(cfg);
        const BrownianStore big(23, kHref, 4 * 1024, static_cast<int>(net.size()));
        const auto ladder = simulate_ladder(net, big, kFactors, 4.0);
        for (std::size_t k = 0; k < kFactors.size(); ++k) {
            const auto solo = simulate(net, kFactors[k] * kHref, 4.0, big, kFactors[k]);
            ok = ok && solo.terminal().v == ladder[k].terminal().v && solo.terminal().i == ladder[k].terminal().i;
            for (std::size_t p = 0; p < solo.spikes.size(); ++p) ok = ok && solo.spikes[p].times == ladder[k].spikes[p].times;
        }
        if (!ok) failed.push_back("coupling");
    }
    // Interlacing of ordered deterministic IF pairs.
    {
        std::mt19937_64 rng(31415);
        std::int64_t worst = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const double leak = 2.0 * uniform01(rng);
            const double mean = 0.5 + 1.5 * uniform01(rng);
            const double amp = 1.5 * uniform01(rng);
            const double freq = 0.5 + 4.0 * uniform01(rng);
            const double phase = 6.283185307179586 * uniform01(rng);
            const double x0 = 0.9 * uniform01(rng);
            const double y0 = x0 + (0.999 - x0) * uniform01(rng);
            const auto f = [leak](double x) { return -leak * x; };
            const auto input = [=](double t) { return mean + amp * std::sin(freq * t + phase); };
            worst = std::max(worst, interlacing_check(if_warmup_simulate(f, input, x0, 6.0, 1e-12, 2e-3),
                                                      if_warmup_simulate(f, input, y0, 6.0, 1e-12, 2e-3)));
        }
        if (worst > 1) failed.push_back("interlacing");
    }
    // psi bounds and the kernel identity.
    {
        std::mt19937_64 rng(2);
        bool ok = true;
        for (int k = 0; k < 10000; ++k) {
            const double tau = 0.05 + uniform01(rng);
            const double x = 5.0 * uniform01(rng);
            const double v = psi(x, tau);
            ok = ok && v >= 0.0 && v <= std::min(1.0, (x / tau) * (x / tau));
            ok = ok && std::abs(kernel_l1_misalignment(x, tau) - 2.0 * tau * std::sqrt(v)) <= 1e-12 * (1.0 + tau);
        }
        if (!ok) failed.push_back("psi");
    }
    // Mismatch decomposition on sampled single-neuron trajectories.
    {
        const auto net = lone(1.0, 0.25);
        const int factors[] = {1, 16, 32};
        bool ok = true;
        for (int s = 0; s < 600; ++s) {
            const BrownianStore store(derive_seed(404, static_cast<std::uint64_t>(s)), kHref, 1024 * 6, 1);
            const auto ladder = simulate_ladder(net, store, factors, 6.0);
            for (std::size_t k = 1; k < 3; ++k) {
                const auto aux = mismatch_auxiliaries(ladder[0].spikes[0], ladder[k].spikes[0], 5.0,
                                                      default_mismatch_delta(ladder[k].h));
                if (!match_trains(ladder[0].spikes[0], ladder[k].spikes[0], 5.0).matched && !aux.any()) ok = false;
            }
        }
        if (!ok) failed.push_back("decomposition");
    }
    Outcome o;
    o.pass = failed.empty();
    o.detail = "coupling, interlacing, psi/kernel, decomposition";
    for (const auto& f : failed) o.detail += "; failed: " + f;
    return o;
}

Outcome depth_trend(int workers) {
    ScenarioConfig cfg = preset("strong-coupling");
    cfg.network.depth = 6;
    cfg.network.width = 8;
    cfg.network.n_exc = 6;
    cfg.network.n_inh = 2;
    cfg.network.drives = std::vector<double>{1.2};
    cfg.grid.checkpoints = {5.0};
    cfg.strong_depths = {3, 4, 5, 6};
    cfg.weak_depths = {6};
    const auto res = run_strong_experiment(cfg, cfg.strong_depths, RunOptions{workers});
    bool ok = res.pool_ok;
    std::string rows;
    for (double h : cfg.grid.h) {
        double prev = 0.0;
        rows += (rows.empty() ? "" : "; ") + fmt("h=2^%.0f", std::log2(h));
        for (int d : cfg.strong_depths) {
            const auto* m = res.summary.find(h, d, 5.0, "mse");
            if (!m) {
                ok = false;
                continue;
            }
            ok = ok && m->value >= prev;
            prev = m->value;
            rows += " " + fmt("%.3g", m->value);
        }
    }
    Outcome o;
    o.pass = ok;
    o.detail = "depths 3-6 over " + std::to_string(res.n_samples) + " samples: " + rows;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    for (int k = 1; k < argc; ++k)
        if (std::string(argv[k]) == "--strict") strict = true;
    const int workers = default_worker_count();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spike-time consistency", spike_time_consistency},
        {"strong order", [&] { return strong_order(workers); }},
        {"weak order", [&] { return weak_order(workers); }},
        {"mismatch scaling", mismatch_scaling},
        {"catch-up oracle", catchup},
        {"exponent neutrality", neutrality},
        {"saltation fidelity", saltation_fidelity},
        {"flux identity", flux_identity},
        {"structural invariants", structural_invariants},
        {"depth trend", [&] { return depth_trend(workers); }},
    };
    int failures = 0;
    int errors = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
            ++errors;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::cout << "criterion " << (k + 1) << " " << (o.pass ? "PASS" : "FAIL") << " [" << criteria[k].first << "] "
                  << o.detail << " (" << fmt("%.1f", secs) << " s)" << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    if (errors > 0) return 1;
    return strict && failures > 0 ? 1 : 0;
}
