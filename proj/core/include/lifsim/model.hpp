#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace lifsim {

/// Deterministic input b(t). A constant level unless `profile` is set.
struct Drive {
    double level = 0.0;
    std::function<double(double)> profile;

    double at(double t) const { return profile ? profile(t) : level; }
    bool is_constant() const { return !profile; }
};

/// Parameters of one current-based LIF neuron.
struct NeuronParams {
    double tau_v = 1.0;   ///< membrane time constant
    double tau_c = 0.2;   ///< synaptic time constant
    double v_th = 1.0;
    double v_r = 0.0;
    double sigma = 0.0;   ///< current noise amplitude (enters as sigma/tau_c dB)
    Drive drive;

    /// Throws std::invalid_argument on non-positive time constants, v_r >= v_th, or sigma < 0.
    void validate() const;
};

/// (v_th - v_r) / tau_v: the current at which the voltage nullcline touches threshold.
double threshold_current(const NeuronParams& p);

/// Off-diagonal entry of the subthreshold propagator,
///   B(delta) = int_0^delta exp(-(delta-s)/tau_v) exp(-s/tau_c) ds,
/// evaluated without cancellation for tau_v close to tau_c.
double propagator_coupling(double delta, double tau_v, double tau_c);

/// Contiguous index range of one layer.
struct LayerRange {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
    Eigen::Index size() const { return end - begin; }
};

/// Network of current-based LIF neurons. `weights(i, j)` is the jump added to neuron i's
/// current when neuron j spikes. Feedforward networks carry `layer_of`; recurrent ones do not.
struct NetworkSpec {
    std::vector<NeuronParams> params;
    Eigen::MatrixXd weights;
    std::optional<std::vector<int>> layer_of;
    std::vector<bool> excitatory;

    Eigen::Index size() const { return static_cast<Eigen::Index>(params.size()); }
    bool is_feedforward() const { return layer_of.has_value(); }

    /// Number of layers; throws std::logic_error for recurrent specs.
    int depth() const;
    /// Layer `layer` (0-based); layers are stored contiguously in ascending order.
    LayerRange layer_range(int layer) const;
    /// Neurons of the first `depth` layers.
    LayerRange prefix_range(int depth) const;

    /// Checks sizes, parameter validity, the feedforward block pattern, and E/I column signs.
    void validate() const;
};

/// Connection sampling arguments for the E-I balanced feedforward ensemble.
struct WeightArgs {
    double p_conn = 0.25;
    double c_w = 0.18;
    int n_exc = 19;
    int n_inh = 5;
};

/// Magnitudes of the excitatory and inhibitory weights for a presynaptic layer of width `n`.
struct EiMagnitudes {
    double excitatory = 0.0;
    double inhibitory = 0.0;
};
EiMagnitudes ei_magnitudes(int n, const WeightArgs& args);

/// Full N x N weight matrix for consecutive layers of the given widths. Entry (j, i) for i in
/// layer l-1 and j in layer l is nonzero with probability p_conn; the first n_exc neurons of
/// each layer are excitatory. Draw order is block, postsynaptic row, presynaptic column.
Eigen::MatrixXd sample_ei_weights(std::span<const int> widths, const WeightArgs& args, std::mt19937_64& rng);

/// Layered network with `depth` layers of `width` neurons. `layer_params` holds either one
/// entry shared by all layers or one entry per layer. Layer 1 receives external input only.
NetworkSpec build_feedforward(int depth, int width, std::span<const NeuronParams> layer_params,
                              const WeightArgs& weights, std::uint64_t seed);

/// General recurrent network with an explicit weight matrix.
NetworkSpec build_recurrent(std::vector<NeuronParams> params, Eigen::MatrixXd weights,
                            std::vector<bool> excitatory = {});

void to_json(nlohmann::json& j, const NeuronParams& p);
void from_json(const nlohmann::json& j, NeuronParams& p);
nlohmann::json network_to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const nlohmann::json& j);

}  // namespace lifsim
