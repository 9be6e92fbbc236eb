#include "lifsim/lyapunov.hpp"

#include "lifsim/errors.hpp"
#include "lifsim/paths.hpp"
#include "lifsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace lifsim {

double saltation_factor(double i_pre, double i_th) {
    if (!(i_pre > i_th)) throw TangencyError("saltation factor requires i_pre > i_th");
    return i_pre / (i_pre - i_th);
}

Eigen::MatrixXd subthreshold_propagator(double delta, double tau_v, double tau_c, int n) {
    if (delta < 0.0) throw std::invalid_argument("propagator needs delta >= 0");
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    const double ev = std::exp(-delta / tau_v);
    const double ec = std::exp(-delta / tau_c);
    const double b = propagator_coupling(delta, tau_v, tau_c);
    for (int p = 0; p < n; ++p) {
        f(p, p) = ev;
        f(p, n + p) = b;
        f(n + p, n + p) = ec;
    }
    return f;
}

namespace {

void check_speed(const NetworkSpec& net, int p, double speed, double speed_floor, double time) {
    const double i_th = threshold_current(net.params[static_cast<std::size_t>(p)]);
    if (!(speed > speed_floor * i_th))
        throw TangencyError("non-transversal crossing of neuron " + std::to_string(p) + " at t=" + std::to_string(time) +
                            " (speed " + std::to_string(speed) + ")");
}

}  // namespace

Eigen::MatrixXd saltation_matrix(const NetworkSpec& net, int p, double i_pre, double speed_floor) {
    const auto n = static_cast<int>(net.size());
    if (p < 0 || p >= n) throw std::out_of_range("neuron index out of range");
    const auto& prm = net.params[static_cast<std::size_t>(p)];
    const double a = i_pre - threshold_current(prm);
    check_speed(net, p, a, speed_floor, 0.0);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    s(p, p) = 0.0;
    for (int q = 0; q < n; ++q) {
        const double w = net.weights(q, p);
        const double tau_c = net.params[static_cast<std::size_t>(q)].tau_c;
        s(q, p) += (w + (q == p ? i_pre : 0.0)) / a;
        s(n + q, p) += -w / tau_c / a;
    }
    return s;
}

std::vector<HybridEvent> ordered_events(const TrajectoryRecord& traj) {
    std::vector<HybridEvent> events;
    for (const auto& train : traj.spikes) {
        if (!train.times.empty() && !train.has_speeds()) throw std::invalid_argument("trajectory lacks crossing speeds");
        for (std::size_t k = 0; k < train.times.size(); ++k)
            if (train.times[k] <= traj.horizon) events.push_back({train.times[k], train.neuron, train.speeds[k]});
    }
    std::sort(events.begin(), events.end(), [](const HybridEvent& a, const HybridEvent& b) {
        return a.time < b.time || (a.time == b.time && a.neuron < b.neuron);
    });
    return events;
}

HybridVariational::HybridVariational(const NetworkSpec& net, double speed_floor)
    : net_(net), phi_(Eigen::MatrixXd::Identity(2 * net.size(), 2 * net.size())), speed_floor_(speed_floor) {}

void HybridVariational::flow(double delta) {
    if (delta < 0.0) throw std::invalid_argument("flow needs delta >= 0");
    if (delta == 0.0) return;
    const Eigen::Index n = net_.size();
    for (Eigen::Index p = 0; p < n; ++p) {
        const auto& prm = net_.params[static_cast<std::size_t>(p)];
        const double ev = std::exp(-delta / prm.tau_v);
        const double ec = std::exp(-delta / prm.tau_c);
        const double b = propagator_coupling(delta, prm.tau_v, prm.tau_c);
        phi_.row(p) = ev * phi_.row(p) + b * phi_.row(n + p);
        phi_.row(n + p) *= ec;
    }
    time_ += delta;
}

void HybridVariational::spike(const HybridEvent& event) {
    const Eigen::Index n = net_.size();
    const int p = event.neuron;
    if (p < 0 || p >= n) throw std::out_of_range("neuron index out of range");
    check_speed(net_, p, event.speed, speed_floor_, event.time);
    const auto& prm = net_.params[static_cast<std::size_t>(p)];
    const double a = event.speed;
    const double i_pre = a + threshold_current(prm);
    const Eigen::RowVectorXd row = phi_.row(p);
    phi_.row(p).setZero();
    for (Eigen::Index q = 0; q < n; ++q) {
        const double w = net_.weights(q, p);
        const double gv = (w + (q == p ? i_pre : 0.0)) / a;
        const double gi = -w / net_.params[static_cast<std::size_t>(q)].tau_c / a;
        if (gv != 0.0) phi_.row(q) += gv * row;
        if (gi != 0.0) phi_.row(n + q) += gi * row;
    }
    events_.push_back(event);
}

double HybridVariational::renormalize() {
    const double norm = phi_.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("degenerate fundamental matrix");
    phi_ /= norm;
    const double g = std::log(norm);
    log_scale_ += g;
    return g;
}

double HybridVariational::log_norm() const {
    return log_scale_ + std::log(phi_.cwiseAbs().rowwise().sum().maxCoeff());
}

HybridVariational hybrid_fundamental_matrix(const TrajectoryRecord& traj, const NetworkSpec& net, double speed_floor) {
    HybridVariational hv(net, speed_floor);
    double t = 0.0;
    for (const auto& e : ordered_events(traj)) {
        hv.flow(e.time - t);
        t = e.time;
        hv.spike(e);
    }
    hv.flow(traj.horizon - t);
    return hv;
}

double spectral_abscissa(const NetworkSpec& net) {
    double tau_max = 0.0;
    for (const auto& p : net.params) tau_max = std::max({tau_max, p.tau_v, p.tau_c});
    if (!(tau_max > 0.0)) throw std::invalid_argument("empty network");
    return -1.0 / tau_max;
}

double saltation_bound(double i_max, double w_max, double alpha_star, double tau_c) {
    if (!(alpha_star > 0.0)) throw std::invalid_argument("alpha_star must be positive");
    return std::max({(i_max + w_max) / alpha_star, 1.0 + w_max / alpha_star, 1.0 + w_max / (tau_c * alpha_star)});
}

LambdaHybResult lambda_hyb_estimate(const NetworkSpec& net, double horizon, const LambdaOptions& options,
                                    std::optional<NetworkState> initial) {
    if (!(horizon > 0.0) || !(options.renorm_interval > 0.0) || options.burn_in < 0.0 || options.burn_in >= 1.0)
        throw std::invalid_argument("invalid exponent estimation options");
    EventOptions eo;
    eo.speed_floor = options.speed_floor;
    eo.initial = std::move(initial);
    const auto traj = deterministic_event_simulate(net, horizon, options.tol, eo);
    if (!traj.degenerate.empty()) {
        const auto& d = traj.degenerate.front();
        throw DegenerateCrossingError(d.time, d.neuron, d.speed);
    }
    const auto events = ordered_events(traj);

    LambdaHybResult out;
    out.n_events = static_cast<std::int64_t>(events.size());
    HybridVariational hv(net, options.speed_floor);
    const double dt = options.renorm_interval;
    double t = 0.0;
    double last = 0.0;
    auto checkpoint = [&](double at) {
        hv.renormalize();
        out.times.push_back(at);
        out.log_norms.push_back(hv.log_scale());
        last = at;
    };
    out.times.push_back(0.0);
    out.log_norms.push_back(0.0);
    auto quiet_checkpoints = [&](double until) {
        while (until - last > 2.0 * dt) {
            hv.flow(last + dt - t);
            t = last + dt;
            checkpoint(t);
        }
    };
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& e = events[k];
        quiet_checkpoints(e.time);
        hv.flow(e.time - t);
        t = e.time;
        hv.spike(e);
        const bool group_done = k + 1 == events.size() || events[k + 1].time > e.time;
        if (group_done && t - last >= dt) checkpoint(t);
    }
    quiet_checkpoints(horizon);

    std::size_t first = 0;
    while (first < out.times.size() && out.times[first] < options.burn_in * horizon) ++first;
    if (first + 1 >= out.times.size()) throw NumericalError("horizon too short for the exponent window");
    out.window_start = out.times[first];
    out.window_end = out.times.back();
    const double span = out.window_end - out.window_start;
    out.lambda = (out.log_norms.back() - out.log_norms[first]) / span;

    std::int64_t in_window = 0;
    out.alpha_star = std::numeric_limits<double>::infinity();
    for (const auto& e : events) {
        if (e.time > out.window_start && e.time <= out.window_end) ++in_window;
        out.alpha_star = std::min(out.alpha_star, e.speed);
    }
    out.rate = static_cast<double>(in_window) / span;
    out.i_max = traj.max_abs_current;
    out.w_max = net.weights.size() > 0 ? net.weights.cwiseAbs().maxCoeff() : 0.0;
    double tau_c_min = std::numeric_limits<double>::infinity();
    for (const auto& p : net.params) tau_c_min = std::min(tau_c_min, p.tau_c);
    out.tau_max = -1.0 / spectral_abscissa(net);
    out.kappa_s = events.empty() ? 1.0 : saltation_bound(out.i_max, out.w_max, out.alpha_star, tau_c_min);
    out.upper_bound = -1.0 / out.tau_max + out.rate * std::log(out.kappa_s);
    return out;
}

double lambda_from_flux(const FluxHistogram& flux, double tau_v, double i_th) {
    if (!(flux.exposure() > 0.0)) throw std::invalid_argument("flux histogram has no exposure");
    double total = -1.0 / tau_v;
    for (std::size_t b = 0; b < flux.bins(); ++b) {
        if (flux.counts()[b] == 0) continue;
        const double a = flux.midpoint(b);
        total += flux.flux(b) * std::log((i_th + a) / a);
    }
    return total;
}

namespace {

struct LineFit {
    double slope = 0.0;
    double std_error = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, std::size_t first) {
    const std::size_t n = x.size() - first;
    LineFit out;
    if (n < 2) return out;
    double mx = 0.0, my = 0.0;
    for (std::size_t k = first; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = first; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0)) return out;
    out.slope = sxy / sxx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t k = first; k < x.size(); ++k) {
            const double r = y[k] - my - out.slope * (x[k] - mx);
            rss += r * r;
        }
        out.std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return out;
}

}  // namespace

TwoCopyResult two_copy_divergence(const NetworkSpec& net, const TwoCopyOptions& options) {
    if (!(options.horizon > 0.0) || !(options.check_interval > 0.0) || !(options.renorm_interval > 0.0) ||
        options.delta0 < 0.0)
        throw std::invalid_argument("invalid two-copy options");
    const auto n = static_cast<int>(net.size());
    bool noisy = false;
    for (const auto& p : net.params) noisy = noisy || p.sigma > 0.0;

    NetworkState a0 = options.initial ? *options.initial : resting_state(net);
    a0.t = 0.0;
    NetworkState b0 = a0;
    std::mt19937_64 rng(derive_seed(options.seed, 0xD1CEULL));
    NormalStream<std::mt19937_64> normal(rng);
    Eigen::VectorXd dir(n);
    for (int p = 0; p < n; ++p) dir[p] = normal();
    if (dir.norm() > 0.0) dir /= dir.norm();
    b0.v += options.delta0 * dir;

    EventIntegrator ea(net, a0, options.tol, 0.0);
    EventIntegrator eb(net, b0, options.tol, 0.0);

    std::int64_t fine_per_check = 1;
    std::optional<BrownianStore> store;
    std::vector<double> gain(static_cast<std::size_t>(n));
    const double step = noisy ? options.h_fine : options.check_interval;
    if (noisy) {
        const double r = options.check_interval / options.h_fine;
        fine_per_check = static_cast<std::int64_t>(std::llround(r));
        if (fine_per_check < 1 || std::abs(r - static_cast<double>(fine_per_check)) > 1e-9)
            throw std::invalid_argument("check interval must be a multiple of the noise step");
        const auto n_fine = static_cast<std::int64_t>(std::ceil(options.horizon / options.h_fine - 1e-9));
        store.emplace(options.seed, options.h_fine, n_fine, n);
        for (int p = 0; p < n; ++p) {
            const auto& prm = net.params[static_cast<std::size_t>(p)];
            gain[static_cast<std::size_t>(p)] = prm.sigma / prm.tau_c;
        }
    }

    std::vector<LayerRange> layers;
    if (net.is_feedforward())
        for (int l = 0; l < net.depth(); ++l) layers.push_back(net.layer_range(l));

    TwoCopyResult out;
    out.layer_log_separation.resize(layers.size());
    auto separation = [&](LayerRange r) {
        const Eigen::Index len = r.size();
        const double dv = (eb.state().v.segment(r.begin, len) - ea.state().v.segment(r.begin, len)).squaredNorm();
        const double di = (eb.state().i.segment(r.begin, len) - ea.state().i.segment(r.begin, len)).squaredNorm();
        return std::sqrt(dv + di);
    };
    const LayerRange all{0, n};
    double scale = 0.0;  // cumulative log of renormalization factors
    auto record = [&](double t) {
        const double d = separation(all);
        out.times.push_back(t);
        if (options.delta0 == 0.0 || d == 0.0) {
            out.log_separation.push_back(-std::numeric_limits<double>::infinity());
            for (auto& tr : out.layer_log_separation) tr.push_back(-std::numeric_limits<double>::infinity());
            return;
        }
        for (std::size_t l = 0; l < layers.size(); ++l)
            out.layer_log_separation[l].push_back(scale + std::log(separation(layers[l]) / options.delta0));
        const double g = std::log(d / options.delta0);
        out.log_separation.push_back(scale + g);
        scale += g;
        const double c = options.delta0 / d;
        auto& sb = eb.mutable_state();
        sb.v = ea.state().v + c * (sb.v - ea.state().v);
        sb.i = ea.state().i + c * (sb.i - ea.state().i);
    };
    record(0.0);

    const auto n_checks = static_cast<std::int64_t>(std::floor(options.horizon / options.check_interval + 1e-9));
    std::vector<double> kick(static_cast<std::size_t>(n));
    double last = 0.0;
    bool prev_mismatch = false;
    double prev_check = 0.0;
    std::int64_t spikes_prev_check = 0;
    auto total_spikes = [&]() {
        std::int64_t s = 0;
        for (auto c : ea.state().spike_count) s += c;
        return s;
    };
    std::int64_t fine_step = 0;
    for (std::int64_t k = 1; k <= n_checks; ++k) {
        const double t_check = static_cast<double>(k) * options.check_interval;
        if (noisy) {
            for (std::int64_t j = 0; j < fine_per_check; ++j, ++fine_step) {
                const double t_end = static_cast<double>(fine_step + 1) * step;
                ea.advance_to(t_end);
                eb.advance_to(t_end);
                for (int p = 0; p < n; ++p)
                    kick[static_cast<std::size_t>(p)] = gain[static_cast<std::size_t>(p)] * store->coarsen(1, p, fine_step);
                ea.kick(kick);
                eb.kick(kick);
            }
        } else {
            ea.advance_to(t_check);
            eb.advance_to(t_check);
        }
        const bool mismatch = ea.state().spike_count != eb.state().spike_count;
        if (mismatch) {
            if (prev_mismatch) {
                out.mismatch_time = prev_check;
                break;
            }
            prev_mismatch = true;
            prev_check = t_check;
            continue;
        }
        prev_mismatch = false;
        const double elapsed = t_check - last;
        // Checkpoints sit on the first check after a spike, so periodic orbits are sampled at one phase.
        const std::int64_t spikes_now = total_spikes();
        const bool spiked = spikes_now > spikes_prev_check;
        spikes_prev_check = spikes_now;
        if (elapsed >= options.renorm_interval && (spiked || elapsed >= 4.0 * options.renorm_interval)) {
            record(t_check);
            last = t_check;
        }
    }
    if (out.mismatch_time && out.times.size() < 2)
        throw NumericalError("copies lost index matching before the first checkpoint; perturbation too large");
    out.window_end = out.times.back();

    std::size_t first = 0;
    while (first < out.times.size() && out.times[first] < options.burn_in * out.window_end) ++first;
    if (options.delta0 > 0.0 && out.times.size() >= 2) {
        if (first + 2 > out.times.size()) first = out.times.size() - 2;
        const auto fit = fit_line(out.times, out.log_separation, first);
        out.exponent = fit.slope;
        out.exponent_std_error = fit.std_error;
        for (const auto& tr : out.layer_log_separation) out.layer_exponents.push_back(fit_line(out.times, tr, first).slope);
    }
    return out;
}

}  // namespace lifsim
