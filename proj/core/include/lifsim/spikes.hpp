#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace lifsim {

/// Spike times of one neuron, optionally with the crossing speed A = I(s-) - i_th of each spike.
struct SpikeTrain {
    int neuron = 0;
    std::vector<double> times;
    std::vector<double> speeds;

    bool has_speeds() const { return !times.empty() && speeds.size() == times.size(); }
    /// N(t): number of spikes with time <= t.
    std::int64_t count_until(double t) const;
    /// Throws std::invalid_argument unless times are strictly increasing and speeds aligned.
    void validate() const;
};

/// Index pairing of one neuron's exact and numerical spikes up to the horizon.
struct NeuronMatch {
    int neuron = 0;
    std::int64_t exact_count = 0;
    std::int64_t numerical_count = 0;
    bool matched = false;        ///< counts agree at the horizon
    std::vector<double> ste;     ///< numerical minus exact, per spike index; empty unless matched

    bool horizon_mismatch() const { return !matched; }
};

struct SpikeMatch {
    std::vector<NeuronMatch> neurons;
    bool network_matched = false;  ///< conjunction over neurons
};

/// Pairs spikes by index when the counts on [0, horizon] agree; otherwise flags a mismatch.
NeuronMatch match_trains(const SpikeTrain& exact, const SpikeTrain& numerical, double horizon);

/// Matches every neuron of two aligned train lists.
SpikeMatch match_network(std::span<const SpikeTrain> exact, std::span<const SpikeTrain> numerical, double horizon);

/// True iff some step (t_m, t_m + h], t_m < horizon, holds different spike counts.
bool stepwise_mismatch(const SpikeTrain& exact, const SpikeTrain& numerical, double h, double horizon);

/// sup_t |N_a(t) - N_b(t)|.
std::int64_t interlacing_check(const SpikeTrain& a, const SpikeTrain& b);

/// Auxiliary events that cover a horizon count mismatch.
struct MismatchAuxiliaries {
    bool boundary_layer = false;  ///< an exact spike in (T - delta, T + delta]
    bool dense_pair = false;      ///< two exact spikes within 2 delta, the first before T + delta
    bool large_error = false;     ///< some index with either spike time <= T + delta has |ste| > delta or no partner

    bool any() const { return boundary_layer || dense_pair || large_error; }
};

/// Evaluates the auxiliary events. Both trains must extend past horizon + delta.
MismatchAuxiliaries mismatch_auxiliaries(const SpikeTrain& exact, const SpikeTrain& numerical,
                                         double horizon, double delta);

/// kappa * sqrt(h log(1/h)).
double default_mismatch_delta(double h, double kappa = 1.0);

nlohmann::json to_json(const SpikeMatch& match);

}  // namespace lifsim
