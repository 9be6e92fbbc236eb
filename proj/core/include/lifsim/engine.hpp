#pragma once

#include "lifsim/model.hpp"
#include "lifsim/paths.hpp"
#include "lifsim/spikes.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace lifsim {

/// Voltages, currents, and spike counts of a network at time t.
struct NetworkState {
    Eigen::VectorXd v;
    Eigen::VectorXd i;
    double t = 0.0;
    std::vector<std::int64_t> spike_count;
};

/// v = v_r and I = b(0) for every neuron.
NetworkState resting_state(const NetworkSpec& net);

enum class Scheme { em_grid, event };

struct Snapshot {
    double t = 0.0;
    Eigen::VectorXd v;
    Eigen::VectorXd i;
};

/// Event with crossing speed below the floor.
struct CrossingDiagnostic {
    double time = 0.0;
    int neuron = 0;
    double speed = 0.0;
};

struct TrajectoryRecord {
    Scheme scheme = Scheme::em_grid;
    double h = 0.0;        ///< grid step (em-grid) or noise step (event; 0 when deterministic)
    double horizon = 0.0;
    std::vector<Snapshot> snapshots;  ///< ascending in time; first is t = 0, last is the horizon
    std::vector<SpikeTrain> spikes;   ///< one train per neuron
    std::vector<CrossingDiagnostic> degenerate;
    double max_abs_current = 0.0;     ///< sup over the run of max_i |I_i(t)|

    const Snapshot& terminal() const { return snapshots.back(); }
    /// Snapshot taken at exactly time t (within 1e-9), or nullptr.
    const Snapshot* at(double t) const;
};

/// One Euler-Maruyama step of length h.
///
/// Voltages advance with start-of-step values, currents take the EM update, and every neuron
/// whose new voltage reaches v_th is reset to v_r. The columns of all neurons firing in this step
/// are then added to the new currents, so a presynaptic spike registered at t_{m+1} enters the
/// postsynaptic current at t_{m+1}. Spike maps within a step commute.
class EmStepper {
public:
    EmStepper(const NetworkSpec& net, double h);

    /// Advances `state` by one step. `increments` holds one Brownian increment per neuron.
    /// Returns the neurons that fired; `speeds()` holds I(t_m) - i_th for each of them.
    std::span<const int> step(NetworkState& state, std::span<const double> increments);
    std::span<const double> speeds() const { return speeds_; }

private:
    const NetworkSpec& net_;
    double h_;
    Eigen::VectorXd h_over_tau_v_, h_over_tau_c_, noise_gain_, v_r_, v_th_, i_th_, drive_;
    std::vector<int> fired_;
    std::vector<double> speeds_;
    bool constant_drive_ = true;
};

struct StepOutcome {
    std::vector<int> fired;
    std::vector<double> speeds;
};

/// Convenience wrapper around EmStepper for single steps.
StepOutcome em_step(NetworkState& state, const NetworkSpec& net, double h, std::span<const double> increments);

struct SimulationOptions {
    std::int64_t snapshot_stride = 0;   ///< 0 keeps only t = 0, checkpoints, and the horizon
    std::vector<double> checkpoints;    ///< must lie on the grid of every simulated step size
    std::optional<NetworkState> initial;
};

/// Grid run with step h = factor * store.h_fine() driven by block sums of the store's path.
/// factor = 1 gives the fine reference trajectory.
TrajectoryRecord simulate(const NetworkSpec& net, double h, double horizon, const BrownianStore& store,
                          int factor, const SimulationOptions& options = {});

/// Runs several coupled step sizes in lockstep over one regeneration of the fine path.
/// Output k is bitwise identical to simulate(..., factors[k], ...).
std::vector<TrajectoryRecord> simulate_ladder(const NetworkSpec& net, const BrownianStore& store,
                                              std::span<const int> factors, double horizon,
                                              const SimulationOptions& options = {});

/// Closed-form subthreshold solution of one neuron with constant drive after time delta.
struct SubthresholdPoint {
    double v = 0.0;
    double i = 0.0;
};
SubthresholdPoint propagate_subthreshold(const NeuronParams& p, double v0, double i0, double delta);

/// First u in [0, delta] with v(u) >= v_th along the closed-form flow, located by bisection to
/// within `tol` (the returned value is the upper bracket). Empty when no crossing occurs.
std::optional<double> first_crossing(const NeuronParams& p, double v0, double i0, double delta, double tol);

struct EventOptions {
    double tol = 1e-13;                 ///< event-location tolerance
    double speed_floor = 1e-8;          ///< relative to i_th; slower crossings are flagged
    const BrownianStore* noise = nullptr;
    int noise_factor = 1;               ///< noise kicks every noise_factor * h_fine
    std::vector<double> snapshot_times;
    std::optional<NetworkState> initial;
};

/// Event-resolved integrator: exact subthreshold flow between events, threshold crossings located
/// by bisection, reset and synaptic column jump at the located time. Optional current noise enters
/// as kicks sigma/tau_c * dB at the end of each noise step; the flow stays exact between kicks, so
/// every recorded crossing speed is a genuine pre-spike value.
class EventIntegrator {
public:
    EventIntegrator(const NetworkSpec& net, NetworkState initial, double tol, double speed_floor);

    /// Flows to t_end, processing every threshold event on the way.
    void advance_to(double t_end);
    /// Adds `delta_i` to the currents at the current time.
    void kick(std::span<const double> delta_i);

    const NetworkState& state() const { return state_; }
    NetworkState& mutable_state() { return state_; }
    const std::vector<SpikeTrain>& trains() const { return trains_; }
    std::vector<SpikeTrain>& trains() { return trains_; }
    const std::vector<CrossingDiagnostic>& degenerate() const { return degenerate_; }
    double max_abs_current() const { return max_abs_current_; }

private:
    void flow_all(double u);
    void fire(int p);

    const NetworkSpec& net_;
    NetworkState state_;
    double tol_;
    std::vector<double> floor_;
    std::vector<SpikeTrain> trains_;
    std::vector<CrossingDiagnostic> degenerate_;
    double max_abs_current_ = 0.0;
};

/// Runs the event integrator to `horizon`. Requires constant drives.
TrajectoryRecord event_simulate(const NetworkSpec& net, double horizon, const EventOptions& options = {});

/// Event-resolved run of a noiseless network. Throws std::invalid_argument if any sigma != 0.
TrajectoryRecord deterministic_event_simulate(const NetworkSpec& net, double horizon, double tol = 1e-13,
                                              EventOptions options = {});

/// CSV with header t,v0..v{N-1},i0..i{N-1}; one row per snapshot.
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record);
/// CSV with header neuron,time,speed (speed empty when not recorded).
void write_spikes_csv(std::ostream& os, const TrajectoryRecord& record);

}  // namespace lifsim
