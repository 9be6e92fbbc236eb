#pragma once

#include "lifsim/engine.hpp"
#include "lifsim/model.hpp"
#include "lifsim/spikes.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lifsim {

/// (1 - exp(-x / tau_c))^2. Throws std::invalid_argument for x < 0.
double psi(double x, double tau_c);

/// L1 distance between an exponential kernel and its copy shifted by eps: 2 tau_c (1 - exp(-|eps| / tau_c)).
double kernel_l1_misalignment(double eps, double tau_c);

/// One Monte Carlo sample for the matched strong error.
struct StrongSample {
    Eigen::VectorXd coarse;     ///< terminal prefix state (v then I) of the coarse run
    Eigen::VectorXd reference;  ///< terminal prefix state of the reference run
    SpikeMatch match;
};

struct StrongError {
    double mse = 0.0;             ///< mean over matched samples of the squared terminal gap (sum of squares)
    double mse_std_error = 0.0;
    std::int64_t n_samples = 0;
    std::int64_t n_matched = 0;
    double matched_fraction = 0.0;
    double impact_mean = 0.0;     ///< mean over matched samples of sum_k psi(|ste_k|)
    double impact_std_error = 0.0;
};

/// Matched strong error. Throws InsufficientPoolError when fewer than max(1, min_pool) samples match.
StrongError matched_strong_error(std::span<const StrongSample> samples, double tau_c, std::int64_t min_pool = 1);

/// Squared Euclidean distance of two state vectors.
double squared_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Sum over matched spikes of psi(|ste|).
double spike_impact(const SpikeMatch& match, double tau_c);

struct ReadoutCoefficients {
    double c_v = 0.8;
    double c_i = 0.5;
    double c_r = 1.0;
    double filter_tau = 0.35;
};

/// tanh(c_v mean v + c_I mean I + c_r r(T)) over the neurons of `layer`, with
/// r(T) = sum over layer spikes s <= T of exp(-(T - s) / filter_tau), divided by the layer size.
double readout_observable(const Snapshot& state, std::span<const SpikeTrain> trains, LayerRange layer,
                          const ReadoutCoefficients& coefs);

/// Same, reading the snapshot at time T from a trajectory. Throws std::invalid_argument if absent.
double readout_observable(const TrajectoryRecord& traj, LayerRange layer, const ReadoutCoefficients& coefs, double T);

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
};

/// Sample mean and standard error of the mean. Requires at least 2 values.
MeanEstimate mean_estimate(std::span<const double> values);

/// Mean and standard error of coarse - reference over paired samples. Requires at least 2 pairs.
MeanEstimate weak_bias(std::span<const std::pair<double, double>> pairs);

struct Proportion {
    std::int64_t successes = 0;
    std::int64_t trials = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Wilson score interval at normal quantile z.
Proportion wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054);

struct MismatchProbability {
    std::vector<Proportion> per_neuron;
    Proportion network;
};

/// Frequencies of horizon mismatch over samples. Requires at least one sample, all of equal size.
MismatchProbability mismatch_probability(std::span<const SpikeMatch> samples, double z = 1.959963984540054);

/// Per-unit-time histogram of crossing speeds.
class FluxHistogram {
public:
    /// Geometric bins on (lo_factor i_th, hi_factor i_th]; the first bin is extended down to 0.
    static FluxHistogram geometric(double i_th, int bins = 64, double lo_factor = 1e-4, double hi_factor = 10.0);
    /// Custom ascending edges; edges.front() must be >= 0.
    explicit FluxHistogram(std::vector<double> edges);

    /// Adds the speeds of the spikes in [0, horizon] and `horizon` units of exposure.
    /// Throws std::invalid_argument if the train carries no speeds but has spikes.
    void add_train(const SpikeTrain& train, double horizon);
    /// Adds every train of a run; exposure grows by trains.size() * horizon.
    void add_trains(std::span<const SpikeTrain> trains, double horizon);
    void merge(const FluxHistogram& other);

    std::size_t bins() const { return counts_.size(); }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    /// Representative speed of bin b (geometric midpoint; the first geometric bin uses its nominal lower edge).
    double midpoint(std::size_t b) const { return mids_[b]; }
    /// Crossings per unit time and per train in bin b.
    double flux(std::size_t b) const;
    std::int64_t overflow() const { return overflow_; }    ///< speeds above the last edge
    std::int64_t nonpositive() const { return nonpositive_; }  ///< speeds <= 0
    std::int64_t total() const;
    double exposure() const { return exposure_; }

private:
    FluxHistogram(std::vector<double> edges, std::vector<double> mids);

    std::vector<double> edges_;
    std::vector<double> mids_;
    std::vector<std::int64_t> counts_;
    std::int64_t overflow_ = 0;
    std::int64_t nonpositive_ = 0;
    double exposure_ = 0.0;
};

/// Histogram of the speeds of every train, normalized by trains.size() * horizon.
FluxHistogram crossing_speed_histogram(std::span<const SpikeTrain> trains, double horizon, FluxHistogram bins);

/// sum_b flux(b) phi(midpoint(b)).
double histogram_integral(const FluxHistogram& hist, const std::function<double(double)>& phi);

struct OuProxyScales {
    double rho_max = 0.0;
    double rho_v_max = 0.0;
};

/// Stationary OU proxies for the boundary-density constants. Throws for sigma_eff <= 0.
OuProxyScales ou_proxy_scales(double tau_v, double tau_c, double sigma_eff);

/// sqrt(sigma_ext^2 + kappa tau_c^2 sum_j W_j^2 r_j). Throws for negative rates or size mismatch.
double effective_sigma(double sigma_ext, double tau_c, std::span<const double> weights, std::span<const double> rates,
                       double kappa = 1.0);

struct OrderFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_std_error = 0.0;
    std::vector<double> residuals;
};

/// Least-squares fit of log(error) against log(h). Requires at least 3 positive pairs.
OrderFit fit_order(std::span<const double> h, std::span<const double> error);

/// MSE/h normalized by (1 + |log h|)^depth, ordered as the inputs.
std::vector<double> polylog_normalized_ratio(std::span<const double> h, std::span<const double> mse, int depth);

/// True iff, ordering by decreasing h, MSE/h never grows faster than (1 + |log h|)^depth
/// by more than the factor (1 + slack) between neighbouring step sizes.
bool polylog_ratio_test(std::span<const double> h, std::span<const double> mse, int depth, double slack = 0.0);

/// One row of a long-format error summary.
struct SummaryRow {
    double h = 0.0;
    int depth = 0;
    double T = 0.0;
    std::string metric;
    double value = 0.0;
    double std_error = 0.0;
};

struct ErrorSummary {
    std::vector<SummaryRow> rows;
    void add(double h, int depth, double T, std::string metric, double value, double std_error = 0.0);
    /// First row matching (h, depth, T, metric), or nullptr.
    const SummaryRow* find(double h, int depth, double T, const std::string& metric) const;
};

/// CSV with header h,depth,T,metric,value,std_error.
void write_summary_csv(std::ostream& os, const ErrorSummary& summary);
/// CSV with header lower,upper,midpoint,count,flux plus an overflow row.
void write_flux_csv(std::ostream& os, const FluxHistogram& hist);

}  // namespace lifsim
