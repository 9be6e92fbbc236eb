#pragma once

#include "lifsim/analysis.hpp"
#include "lifsim/engine.hpp"
#include "lifsim/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace lifsim {

/// i_pre / (i_pre - i_th). Throws TangencyError unless i_pre > i_th.
double saltation_factor(double i_pre, double i_th);

/// Block matrix [[e^{-D/tau_v} Id, B(D) Id], [0, e^{-D/tau_c} Id]] of size 2n, acting on (dv, dI).
Eigen::MatrixXd subthreshold_propagator(double delta, double tau_v, double tau_c, int n);

/// Saltation matrix of a spike of neuron p with pre-spike current i_pre.
/// Throws TangencyError if the crossing speed is not above speed_floor * i_th.
Eigen::MatrixXd saltation_matrix(const NetworkSpec& net, int p, double i_pre, double speed_floor = 1e-8);

/// A spike as seen by the variational equation.
struct HybridEvent {
    double time = 0.0;
    int neuron = 0;
    double speed = 0.0;  ///< crossing speed A = I(s-) - i_th
};

/// Time-ordered events of a trajectory, ties broken by ascending neuron index.
std::vector<HybridEvent> ordered_events(const TrajectoryRecord& traj);

/// Running product of propagators and saltation matrices with renormalization.
/// The true fundamental matrix is exp(log_scale) * phi.
class HybridVariational {
public:
    explicit HybridVariational(const NetworkSpec& net, double speed_floor = 1e-8);

    /// Multiplies by F(delta) from the left.
    void flow(double delta);
    /// Multiplies by the saltation matrix of `event` from the left.
    void spike(const HybridEvent& event);
    /// Divides phi by its max-row-sum norm, adds the log of that norm to log_scale, and returns it.
    double renormalize();
    /// log of the max-row-sum norm of the unnormalized product.
    double log_norm() const;

    const Eigen::MatrixXd& phi() const { return phi_; }
    double log_scale() const { return log_scale_; }
    double time() const { return time_; }
    const std::vector<HybridEvent>& events() const { return events_; }

private:
    const NetworkSpec& net_;
    Eigen::MatrixXd phi_;
    double log_scale_ = 0.0;
    double time_ = 0.0;
    double speed_floor_;
    std::vector<HybridEvent> events_;
};

/// F(T - s_M) S_{p_M} ... S_{p_1} F(s_1) along an event-resolved trajectory.
/// Throws TangencyError at the first event below the speed floor.
HybridVariational hybrid_fundamental_matrix(const TrajectoryRecord& traj, const NetworkSpec& net,
                                            double speed_floor = 1e-8);

/// Largest real part of the subthreshold generator, -1 / tau_max.
double spectral_abscissa(const NetworkSpec& net);

struct LambdaOptions {
    double renorm_interval = 1.0;  ///< minimum time between checkpoints
    double burn_in = 0.2;          ///< fraction of the horizon discarded before the first used checkpoint
    double tol = 1e-13;            ///< event-location tolerance
    double speed_floor = 1e-8;     ///< relative to i_th
};

struct LambdaHybResult {
    double lambda = 0.0;
    double upper_bound = 0.0;
    double rate = 0.0;             ///< total spike rate over the estimation window
    double kappa_s = 0.0;
    double alpha_star = 0.0;       ///< smallest crossing speed over the run (infinity without spikes)
    double i_max = 0.0;
    double w_max = 0.0;
    double tau_max = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::int64_t n_events = 0;
    std::vector<double> times;     ///< checkpoint times
    std::vector<double> log_norms; ///< cumulative log growth at each checkpoint
};

/// Top hybrid exponent of a noiseless network from the renormalized fundamental matrix and the bound
/// -1/tau_max + r log kappa_S evaluated over the same window. Checkpoints follow the first event after
/// each renormalization interval; in spike-free stretches they fall at fixed intervals.
LambdaHybResult lambda_hyb_estimate(const NetworkSpec& net, double horizon, const LambdaOptions& options = {},
                                    std::optional<NetworkState> initial = std::nullopt);

/// kappa_S = max{(I_max + |W|_max) / alpha, 1 + |W|_max / alpha, 1 + |W|_max / (tau_c alpha)}.
double saltation_bound(double i_max, double w_max, double alpha_star, double tau_c);

/// -1/tau_v + sum_b flux(b) log((i_th + a_b) / a_b). Throws for a histogram without exposure.
double lambda_from_flux(const FluxHistogram& flux, double tau_v, double i_th);

struct TwoCopyOptions {
    std::uint64_t seed = 1;
    double delta0 = 1e-8;           ///< initial and renormalized separation
    double horizon = 100.0;
    double h_fine = 1.0 / 1024.0;   ///< noise step (and check interval when noiseless)
    double check_interval = 1.0 / 64.0;  ///< count comparisons happen on this grid
    double renorm_interval = 1.0;
    double burn_in = 0.1;           ///< fraction of the horizon excluded from the fit
    double tol = 1e-13;
    std::optional<NetworkState> initial;
};

struct TwoCopyResult {
    std::vector<double> times;      ///< checkpoint times with matching spike counts
    std::vector<double> log_separation;  ///< cumulative log(|delta| / delta0)
    std::vector<std::vector<double>> layer_log_separation;  ///< per layer (feedforward only)
    double exponent = 0.0;
    double exponent_std_error = 0.0;
    std::vector<double> layer_exponents;
    std::optional<double> mismatch_time;  ///< first persistent index mismatch
    double window_end = 0.0;
};

/// Two copies with common noise and initial voltages differing by a random direction of size delta0.
/// Separation is measured and renormalized at check times where both copies have equal spike counts;
/// counts differing at two consecutive checks end the fit window. Throws NumericalError if this
/// happens before the first checkpoint.
TwoCopyResult two_copy_divergence(const NetworkSpec& net, const TwoCopyOptions& options);

}  // namespace lifsim
