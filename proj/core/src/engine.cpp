#include "lifsim/engine.hpp"

#include "lifsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lifsim {

DegenerateCrossingError::DegenerateCrossingError(double time, int neuron, double speed)
    : NumericalError("degenerate threshold crossing of neuron " + std::to_string(neuron) + " at t=" +
                     std::to_string(time) + " (speed " + std::to_string(speed) + ")"),
      time_(time), neuron_(neuron), speed_(speed) {}

NetworkState resting_state(const NetworkSpec& net) {
    NetworkState s;
    const Eigen::Index n = net.size();
    s.v.resize(n);
    s.i.resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        const auto& prm = net.params[static_cast<std::size_t>(p)];
        s.v[p] = prm.v_r;
        s.i[p] = prm.drive.at(0.0);
    }
    s.spike_count.assign(static_cast<std::size_t>(n), 0);
    return s;
}

const Snapshot* TrajectoryRecord::at(double t) const {
    auto it = std::lower_bound(snapshots.begin(), snapshots.end(), t - 1e-9,
                               [](const Snapshot& s, double x) { return s.t < x; });
    if (it != snapshots.end() && std::abs(it->t - t) <= 1e-9) return &*it;
    return nullptr;
}

namespace {

void check_state(const NetworkSpec& net, const NetworkState& s) {
    if (s.v.size() != net.size() || s.i.size() != net.size() ||
        s.spike_count.size() != static_cast<std::size_t>(net.size()))
        throw std::invalid_argument("state size does not match the network");
}

Snapshot snapshot_of(const NetworkState& s, double t) { return Snapshot{t, s.v, s.i}; }

std::int64_t grid_index(double t, double h, const char* what) {
    const double x = t / h;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)))
        throw std::invalid_argument(std::string(what) + " " + std::to_string(t) + " is not a multiple of h=" +
                                    std::to_string(h));
    return static_cast<std::int64_t>(r);
}

}  // namespace

EmStepper::EmStepper(const NetworkSpec& net, double h) : net_(net), h_(h) {
    if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
    const Eigen::Index n = net.size();
    h_over_tau_v_.resize(n);
    h_over_tau_c_.resize(n);
    noise_gain_.resize(n);
    v_r_.resize(n);
    v_th_.resize(n);
    i_th_.resize(n);
    drive_.resize(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        const auto& prm = net.params[static_cast<std::size_t>(p)];
        h_over_tau_v_[p] = h / prm.tau_v;
        h_over_tau_c_[p] = h / prm.tau_c;
        noise_gain_[p] = prm.sigma / prm.tau_c;
        v_r_[p] = prm.v_r;
        v_th_[p] = prm.v_th;
        i_th_[p] = threshold_current(prm);
        drive_[p] = prm.drive.level;
        constant_drive_ = constant_drive_ && prm.drive.is_constant();
    }
    fired_.reserve(static_cast<std::size_t>(n));
    speeds_.reserve(static_cast<std::size_t>(n));
}

std::span<const int> EmStepper::step(NetworkState& state, std::span<const double> increments) {
    const Eigen::Index n = net_.size();
    if (static_cast<Eigen::Index>(increments.size()) != n) throw std::invalid_argument("one increment per neuron required");
    fired_.clear();
    speeds_.clear();
    const double t = state.t;
    bool finite = true;
    for (Eigen::Index p = 0; p < n; ++p) {
        const double v = state.v[p];
        const double cur = state.i[p];
        const double b = constant_drive_ ? drive_[p] : net_.params[static_cast<std::size_t>(p)].drive.at(t);
        const double v_new = v + h_over_tau_v_[p] * (-(v - v_r_[p])) + h_ * cur;
        const double i_new = cur - h_over_tau_c_[p] * (cur - b) + noise_gain_[p] * increments[static_cast<std::size_t>(p)];
        finite = finite && std::isfinite(v_new) && std::isfinite(i_new);
        if (v_new >= v_th_[p]) {
            fired_.push_back(static_cast<int>(p));
            speeds_.push_back(cur - i_th_[p]);
            state.v[p] = v_r_[p];
        } else {
            state.v[p] = v_new;
        }
        state.i[p] = i_new;
    }
    if (!finite) throw NumericalError("non-finite network state at t=" + std::to_string(t));
    for (int p : fired_) {
        state.i += net_.weights.col(p);
        ++state.spike_count[static_cast<std::size_t>(p)];
    }
    state.t = t + h_;
    return fired_;
}

StepOutcome em_step(NetworkState& state, const NetworkSpec& net, double h, std::span<const double> increments) {
    check_state(net, state);
    EmStepper stepper(net, h);
    const auto fired = stepper.step(state, increments);
    StepOutcome out;
    out.fired.assign(fired.begin(), fired.end());
    out.speeds.assign(stepper.speeds().begin(), stepper.speeds().end());
    return out;
}

TrajectoryRecord simulate(const NetworkSpec& net, double h, double horizon, const BrownianStore& store, int factor,
                          const SimulationOptions& options) {
    const double expected = factor * store.h_fine();
    if (std::abs(h - expected) > 1e-12 * expected)
        throw std::invalid_argument("h must equal factor * h_fine of the Brownian store");
    const int factors[] = {factor};
    return std::move(simulate_ladder(net, store, factors, horizon, options).front());
}

std::vector<TrajectoryRecord> simulate_ladder(const NetworkSpec& net, const BrownianStore& store,
                                              std::span<const int> factors, double horizon,
                                              const SimulationOptions& options) {
    const Eigen::Index n = net.size();
    if (store.n_neurons() != n) throw std::invalid_argument("Brownian store does not cover every neuron");
    if (factors.empty()) throw std::invalid_argument("at least one step size required");
    int max_factor = 1;
    for (int f : factors) {
        store.check_factor(f);
        max_factor = std::max(max_factor, f);
    }
    const double h_fine = store.h_fine();
    const std::int64_t n_fine = grid_index(horizon, h_fine * max_factor, "horizon") * max_factor;
    if (n_fine > store.n_fine_steps()) throw std::invalid_argument("horizon exceeds the Brownian store");

    struct Level {
        int factor;
        double h;
        std::int64_t n_steps;
        NetworkState state;
        EmStepper stepper;
        TrajectoryRecord record;
        std::vector<std::int64_t> checkpoint_steps;
        std::size_t next_checkpoint = 0;
        std::int64_t step = 0;
    };
    std::vector<Level> levels;
    levels.reserve(factors.size());
    for (int f : factors) {
        const double h = f * h_fine;
        NetworkState s0 = options.initial ? *options.initial : resting_state(net);
        check_state(net, s0);
        s0.t = 0.0;
        Level lv{f, h, n_fine / f, s0, EmStepper(net, h), {}, {}, 0, 0};
        lv.record.scheme = Scheme::em_grid;
        lv.record.h = h;
        lv.record.horizon = horizon;
        lv.record.spikes.resize(static_cast<std::size_t>(n));
        for (Eigen::Index p = 0; p < n; ++p) lv.record.spikes[static_cast<std::size_t>(p)].neuron = static_cast<int>(p);
        lv.record.snapshots.push_back(snapshot_of(s0, 0.0));
        lv.record.max_abs_current = s0.i.cwiseAbs().maxCoeff();
        for (double c : options.checkpoints) {
            const std::int64_t k = grid_index(c, h, "checkpoint");
            if (k < 0 || k > lv.n_steps) throw std::invalid_argument("checkpoint outside the horizon");
            lv.checkpoint_steps.push_back(k);
        }
        std::sort(lv.checkpoint_steps.begin(), lv.checkpoint_steps.end());
        levels.push_back(std::move(lv));
    }

    const std::int64_t chunk = std::max<std::int64_t>(4096, max_factor);
    std::vector<double> fine(static_cast<std::size_t>(n * chunk));
    std::vector<double> coarse(static_cast<std::size_t>(n * chunk));
    std::vector<double> step_inc(static_cast<std::size_t>(n));

    for (std::int64_t start = 0; start < n_fine; start += chunk) {
        const std::int64_t len = std::min(chunk, n_fine - start);
        for (Eigen::Index p = 0; p < n; ++p)
            store.fine_increments(static_cast<int>(p), start,
                                  std::span<double>(fine.data() + p * len, static_cast<std::size_t>(len)));
        for (auto& lv : levels) {
            const std::int64_t m = len / lv.factor;
            for (Eigen::Index p = 0; p < n; ++p)
                block_sum(std::span<const double>(fine.data() + p * len, static_cast<std::size_t>(len)), lv.factor,
                          std::span<double>(coarse.data() + p * m, static_cast<std::size_t>(m)));
            for (std::int64_t k = 0; k < m; ++k) {
                for (Eigen::Index p = 0; p < n; ++p) step_inc[static_cast<std::size_t>(p)] = coarse[static_cast<std::size_t>(p * m + k)];
                const auto fired = lv.stepper.step(lv.state, step_inc);
                ++lv.step;
                // Grid times are exact multiples of h.
                const double t = static_cast<double>(lv.step) * lv.h;
                lv.state.t = t;
                const auto speeds = lv.stepper.speeds();
                for (std::size_t q = 0; q < fired.size(); ++q) {
                    auto& train = lv.record.spikes[static_cast<std::size_t>(fired[q])];
                    train.times.push_back(t);
                    train.speeds.push_back(speeds[q]);
                }
                lv.record.max_abs_current = std::max(lv.record.max_abs_current, lv.state.i.cwiseAbs().maxCoeff());
                bool take = lv.step == lv.n_steps ||
                            (options.snapshot_stride > 0 && lv.step % options.snapshot_stride == 0);
                while (lv.next_checkpoint < lv.checkpoint_steps.size() &&
                       lv.checkpoint_steps[lv.next_checkpoint] <= lv.step) {
                    take = take || lv.checkpoint_steps[lv.next_checkpoint] == lv.step;
                    ++lv.next_checkpoint;
                }
                if (take) lv.record.snapshots.push_back(snapshot_of(lv.state, t));
            }
        }
    }

    std::vector<TrajectoryRecord> out;
    out.reserve(levels.size());
    for (auto& lv : levels) {
        if (lv.n_steps == 0) lv.record.snapshots.push_back(lv.record.snapshots.front());
        out.push_back(std::move(lv.record));
    }
    return out;
}

SubthresholdPoint propagate_subthreshold(const NeuronParams& p, double v0, double i0, double delta) {
    const double b = p.drive.level;
    const double ev = std::exp(-delta / p.tau_v);
    SubthresholdPoint out;
    out.i = b + (i0 - b) * std::exp(-delta / p.tau_c);
    out.v = p.v_r + ev * (v0 - p.v_r) + b * p.tau_v * -std::expm1(-delta / p.tau_v) +
            (i0 - b) * propagator_coupling(delta, p.tau_v, p.tau_c);
    return out;
}

namespace {

struct GapFunction {
    const NeuronParams& p;
    double v0;
    double i0;

    double gap(double u) const { return propagate_subthreshold(p, v0, i0, u).v - p.v_th; }
    double slope(double u) const {
        const auto s = propagate_subthreshold(p, v0, i0, u);
        return -(s.v - p.v_r) / p.tau_v + s.i;
    }
};

double bisect_root(const GapFunction& g, double lo, double hi, double tol) {
    // Invariant: g(lo) < 0 <= g(hi).
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g.gap(mid) >= 0.0) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace

std::optional<double> first_crossing(const NeuronParams& p, double v0, double i0, double delta, double tol) {
    const GapFunction g{p, v0, i0};
    if (v0 >= p.v_th) return 0.0;
    if (delta <= 0.0) return std::nullopt;
    const double d0 = g.slope(0.0);
    const double d1 = g.slope(delta);
    // The slope is a combination of two decaying exponentials and changes sign at most once.
    if (d0 > 0.0 && d1 < 0.0) {
        double lo = 0.0;
        double hi = delta;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (g.slope(mid) > 0.0) lo = mid;
            else hi = mid;
        }
        const double peak = lo;
        if (g.gap(peak) >= 0.0) return bisect_root(g, 0.0, peak, tol);
        if (g.gap(hi) >= 0.0) return bisect_root(g, 0.0, hi, tol);
        return std::nullopt;
    }
    if (g.gap(delta) >= 0.0) return bisect_root(g, 0.0, delta, tol);
    return std::nullopt;
}

EventIntegrator::EventIntegrator(const NetworkSpec& net, NetworkState initial, double tol, double speed_floor)
    : net_(net), state_(std::move(initial)), tol_(tol) {
    check_state(net, state_);
    if (!(tol > 0.0)) throw std::invalid_argument("event tolerance must be positive");
    const Eigen::Index n = net.size();
    floor_.resize(static_cast<std::size_t>(n));
    trains_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < n; ++p) {
        const auto& prm = net.params[static_cast<std::size_t>(p)];
        if (!prm.drive.is_constant()) throw std::invalid_argument("event integration requires constant drives");
        floor_[static_cast<std::size_t>(p)] = speed_floor * threshold_current(prm);
        trains_[static_cast<std::size_t>(p)].neuron = static_cast<int>(p);
    }
    max_abs_current_ = n > 0 ? state_.i.cwiseAbs().maxCoeff() : 0.0;
}

void EventIntegrator::flow_all(double u) {
    if (u <= 0.0) return;
    for (Eigen::Index p = 0; p < net_.size(); ++p) {
        const auto s = propagate_subthreshold(net_.params[static_cast<std::size_t>(p)], state_.v[p], state_.i[p], u);
        state_.v[p] = s.v;
        state_.i[p] = s.i;
    }
}

void EventIntegrator::fire(int p) {
    const auto& prm = net_.params[static_cast<std::size_t>(p)];
    const double speed = state_.i[p] - threshold_current(prm);
    auto& train = trains_[static_cast<std::size_t>(p)];
    if (!train.times.empty() && !(state_.t > train.times.back()))
        throw NumericalError("two events of neuron " + std::to_string(p) + " at one time");
    train.times.push_back(state_.t);
    train.speeds.push_back(speed);
    if (speed < floor_[static_cast<std::size_t>(p)]) degenerate_.push_back({state_.t, p, speed});
    state_.v[p] = prm.v_r;
    state_.i += net_.weights.col(p);
    ++state_.spike_count[static_cast<std::size_t>(p)];
    max_abs_current_ = std::max(max_abs_current_, state_.i.cwiseAbs().maxCoeff());
}

void EventIntegrator::advance_to(double t_end) {
    const Eigen::Index n = net_.size();
    while (state_.t < t_end) {
        const double span = t_end - state_.t;
        double best = std::numeric_limits<double>::infinity();
        int who = -1;
        for (Eigen::Index p = 0; p < n; ++p) {
            const auto u = first_crossing(net_.params[static_cast<std::size_t>(p)], state_.v[p], state_.i[p], span, tol_);
            // Strict comparison keeps the lowest index on exact ties.
            if (u && *u < best) {
                best = *u;
                who = static_cast<int>(p);
            }
        }
        if (who < 0) {
            flow_all(span);
            state_.t = t_end;
            break;
        }
        flow_all(best);
        state_.t = best >= span ? t_end : state_.t + best;
        // The located time is the upper bracket, so the firing neuron sits at or above threshold.
        fire(who);
        if (!state_.v.allFinite() || !state_.i.allFinite())
            throw NumericalError("non-finite state in event integration at t=" + std::to_string(state_.t));
    }
    max_abs_current_ = std::max(max_abs_current_, n > 0 ? state_.i.cwiseAbs().maxCoeff() : 0.0);
}

void EventIntegrator::kick(std::span<const double> delta_i) {
    if (static_cast<Eigen::Index>(delta_i.size()) != net_.size()) throw std::invalid_argument("one kick per neuron required");
    for (Eigen::Index p = 0; p < net_.size(); ++p) state_.i[p] += delta_i[static_cast<std::size_t>(p)];
    max_abs_current_ = std::max(max_abs_current_, state_.i.cwiseAbs().maxCoeff());
}

TrajectoryRecord event_simulate(const NetworkSpec& net, double horizon, const EventOptions& options) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
    NetworkState s0 = options.initial ? *options.initial : resting_state(net);
    s0.t = 0.0;
    EventIntegrator integ(net, s0, options.tol, options.speed_floor);
    TrajectoryRecord rec;
    rec.scheme = Scheme::event;
    rec.horizon = horizon;
    rec.snapshots.push_back(snapshot_of(s0, 0.0));

    std::vector<double> snaps = options.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;
    auto flow_with_snapshots = [&](double t_target) {
        while (next_snap < snaps.size() && snaps[next_snap] <= t_target) {
            if (snaps[next_snap] > integ.state().t || (snaps[next_snap] > 0.0 && snaps[next_snap] == integ.state().t)) {
                integ.advance_to(snaps[next_snap]);
                if (snaps[next_snap] < horizon) rec.snapshots.push_back(snapshot_of(integ.state(), snaps[next_snap]));
            }
            ++next_snap;
        }
        integ.advance_to(t_target);
    };

    if (options.noise) {
        const BrownianStore& store = *options.noise;
        if (store.n_neurons() != net.size()) throw std::invalid_argument("Brownian store does not cover every neuron");
        store.check_factor(options.noise_factor);
        const double h = options.noise_factor * store.h_fine();
        rec.h = h;
        const auto n_steps = static_cast<std::int64_t>(std::floor(horizon / h + 1e-9));
        if (n_steps * options.noise_factor > store.n_fine_steps()) throw std::invalid_argument("horizon exceeds the Brownian store");
        std::vector<double> gain(static_cast<std::size_t>(net.size()));
        for (Eigen::Index p = 0; p < net.size(); ++p) {
            const auto& prm = net.params[static_cast<std::size_t>(p)];
            gain[static_cast<std::size_t>(p)] = prm.sigma / prm.tau_c;
        }
        std::vector<double> inc(static_cast<std::size_t>(net.size()));
        std::vector<double> kick(static_cast<std::size_t>(net.size()));
        for (std::int64_t m = 0; m < n_steps; ++m) {
            flow_with_snapshots(std::min(horizon, static_cast<double>(m + 1) * h));
            for (Eigen::Index p = 0; p < net.size(); ++p) {
                inc[static_cast<std::size_t>(p)] = store.coarsen(options.noise_factor, static_cast<int>(p), m);
                kick[static_cast<std::size_t>(p)] = gain[static_cast<std::size_t>(p)] * inc[static_cast<std::size_t>(p)];
            }
            integ.kick(kick);
        }
    }
    flow_with_snapshots(horizon);
    rec.snapshots.push_back(snapshot_of(integ.state(), horizon));
    rec.spikes = integ.trains();
    rec.degenerate = integ.degenerate();
    rec.max_abs_current = integ.max_abs_current();
    return rec;
}

TrajectoryRecord deterministic_event_simulate(const NetworkSpec& net, double horizon, double tol, EventOptions options) {
    for (const auto& p : net.params)
        if (p.sigma != 0.0) throw std::invalid_argument("deterministic event simulation requires sigma = 0");
    options.tol = tol;
    options.noise = nullptr;
    return event_simulate(net, horizon, options);
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record) {
    const Eigen::Index n = record.snapshots.empty() ? 0 : record.snapshots.front().v.size();
    os << "t";
    for (Eigen::Index p = 0; p < n; ++p) os << ",v" << p;
    for (Eigen::Index p = 0; p < n; ++p) os << ",i" << p;
    os << '\n';
    os.precision(17);
    for (const auto& s : record.snapshots) {
        os << s.t;
        for (Eigen::Index p = 0; p < n; ++p) os << ',' << s.v[p];
        for (Eigen::Index p = 0; p < n; ++p) os << ',' << s.i[p];
        os << '\n';
    }
}

void write_spikes_csv(std::ostream& os, const TrajectoryRecord& record) {
    os << "neuron,time,speed\n";
    os.precision(17);
    for (const auto& train : record.spikes) {
        for (std::size_t k = 0; k < train.times.size(); ++k) {
            os << train.neuron << ',' << train.times[k] << ',';
            if (k < train.speeds.size()) os << train.speeds[k];
            os << '\n';
        }
    }
}

}  // namespace lifsim
