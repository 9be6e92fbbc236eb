#include "lifsim/model.hpp"

#include "lifsim/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lifsim {

void NeuronParams::validate() const {
    if (!(tau_v > 0.0) || !std::isfinite(tau_v)) throw std::invalid_argument("tau_v must be positive");
    if (!(tau_c > 0.0) || !std::isfinite(tau_c)) throw std::invalid_argument("tau_c must be positive");
    if (!(v_r < v_th)) throw std::invalid_argument("reset voltage must lie below threshold");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be nonnegative");
    const double i_th = threshold_current(*this);
    if (!std::isfinite(i_th) || !(i_th > 0.0)) throw std::invalid_argument("threshold current must be finite and positive");
}

double threshold_current(const NeuronParams& p) { return (p.v_th - p.v_r) / p.tau_v; }

double propagator_coupling(double delta, double tau_v, double tau_c) {
    // B = delta e^{-delta/tau_v} (e^{k delta} - 1)/(k delta),  k = 1/tau_v - 1/tau_c
    const double k = 1.0 / tau_v - 1.0 / tau_c;
    const double x = k * delta;
    const double phi1 = std::abs(x) < 1e-300 ? 1.0 : std::expm1(x) / x;
    return delta * std::exp(-delta / tau_v) * phi1;
}

int NetworkSpec::depth() const {
    if (!layer_of) throw std::logic_error("depth() requires a feedforward network");
    if (layer_of->empty()) return 0;
    return layer_of->back() + 1;
}

LayerRange NetworkSpec::layer_range(int layer) const {
    if (!layer_of) throw std::logic_error("layer_range() requires a feedforward network");
    const auto& lo = *layer_of;
    if (layer < 0 || layer >= depth()) throw std::out_of_range("layer index out of range");
    LayerRange r;
    r.begin = std::lower_bound(lo.begin(), lo.end(), layer) - lo.begin();
    r.end = std::upper_bound(lo.begin(), lo.end(), layer) - lo.begin();
    return r;
}

LayerRange NetworkSpec::prefix_range(int prefix_depth) const {
    if (prefix_depth < 1 || prefix_depth > depth()) throw std::out_of_range("prefix depth out of range");
    return {0, layer_range(prefix_depth - 1).end};
}

void NetworkSpec::validate() const {
    const Eigen::Index n = size();
    if (weights.rows() != n || weights.cols() != n) throw std::invalid_argument("weight matrix must be N x N");
    for (const auto& p : params) p.validate();
    if (!weights.allFinite()) throw std::invalid_argument("weights must be finite");
    if (!excitatory.empty()) {
        if (static_cast<Eigen::Index>(excitatory.size()) != n) throw std::invalid_argument("excitatory mask size mismatch");
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool exc = excitatory[static_cast<std::size_t>(j)];
            if (exc && (weights.col(j).array() < 0.0).any())
                throw std::invalid_argument("excitatory column " + std::to_string(j) + " has a negative entry");
            if (!exc && (weights.col(j).array() > 0.0).any())
                throw std::invalid_argument("inhibitory column " + std::to_string(j) + " has a positive entry");
        }
    }
    if (layer_of) {
        const auto& lo = *layer_of;
        if (static_cast<Eigen::Index>(lo.size()) != n) throw std::invalid_argument("layer_of size mismatch");
        for (std::size_t k = 0; k < lo.size(); ++k) {
            if (lo[k] < 0) throw std::invalid_argument("negative layer index");
            if (k > 0 && (lo[k] < lo[k - 1] || lo[k] > lo[k - 1] + 1))
                throw std::invalid_argument("layers must be contiguous and ascending");
        }
        if (!lo.empty() && lo.front() != 0) throw std::invalid_argument("first layer must have index 0");
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (weights(i, j) != 0.0 && lo[static_cast<std::size_t>(i)] != lo[static_cast<std::size_t>(j)] + 1)
                    throw std::invalid_argument("feedforward weight outside consecutive-layer block at (" +
                                                std::to_string(i) + ", " + std::to_string(j) + ")");
    }
}

EiMagnitudes ei_magnitudes(int n, const WeightArgs& args) {
    const double scale = args.c_w / std::sqrt(static_cast<double>(n) * args.p_conn);
    EiMagnitudes m;
    m.excitatory = scale;
    m.inhibitory = args.n_inh > 0 ? static_cast<double>(args.n_exc) / args.n_inh * scale : 0.0;
    return m;
}

Eigen::MatrixXd sample_ei_weights(std::span<const int> widths, const WeightArgs& args, std::mt19937_64& rng) {
    if (!(args.p_conn > 0.0 && args.p_conn <= 1.0)) throw std::invalid_argument("p_conn must lie in (0, 1]");
    if (args.n_exc < 0 || args.n_inh < 0) throw std::invalid_argument("population counts must be nonnegative");
    for (int w : widths) {
        if (w < 1) throw std::invalid_argument("layer widths must be positive");
        if (args.n_exc + args.n_inh != w)
            throw std::invalid_argument("n_exc + n_inh must equal the layer width (" + std::to_string(w) + ")");
    }
    const int n_total = std::accumulate(widths.begin(), widths.end(), 0);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_total, n_total);
    int pre_begin = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const int pre_width = widths[l - 1];
        const int post_begin = pre_begin + pre_width;
        const EiMagnitudes mag = ei_magnitudes(pre_width, args);
        for (int j = 0; j < widths[l]; ++j) {
            for (int i = 0; i < pre_width; ++i) {
                if (uniform01(rng) < args.p_conn) {
                    w(post_begin + j, pre_begin + i) = i < args.n_exc ? mag.excitatory : -mag.inhibitory;
                }
            }
        }
        pre_begin = post_begin;
    }
    return w;
}

NetworkSpec build_feedforward(int depth, int width, std::span<const NeuronParams> layer_params,
                              const WeightArgs& weights, std::uint64_t seed) {
    if (depth < 1) throw std::invalid_argument("depth must be at least 1");
    if (width < 1) throw std::invalid_argument("width must be at least 1");
    if (layer_params.size() != 1 && layer_params.size() != static_cast<std::size_t>(depth))
        throw std::invalid_argument("layer_params must have one entry or one per layer");
    NetworkSpec net;
    const std::size_t n = static_cast<std::size_t>(depth) * static_cast<std::size_t>(width);
    net.params.reserve(n);
    std::vector<int> layer_of;
    layer_of.reserve(n);
    net.excitatory.reserve(n);
    for (int l = 0; l < depth; ++l) {
        const NeuronParams& p = layer_params.size() == 1 ? layer_params[0] : layer_params[static_cast<std::size_t>(l)];
        for (int j = 0; j < width; ++j) {
            net.params.push_back(p);
            layer_of.push_back(l);
            net.excitatory.push_back(j < weights.n_exc);
        }
    }
    net.layer_of = std::move(layer_of);
    const std::vector<int> widths(static_cast<std::size_t>(depth), width);
    std::mt19937_64 rng(seed);
    net.weights = sample_ei_weights(widths, weights, rng);
    net.validate();
    return net;
}

NetworkSpec build_recurrent(std::vector<NeuronParams> params, Eigen::MatrixXd weights, std::vector<bool> excitatory) {
    NetworkSpec net;
    net.params = std::move(params);
    net.weights = std::move(weights);
    net.excitatory = std::move(excitatory);
    net.validate();
    return net;
}

void to_json(nlohmann::json& j, const NeuronParams& p) {
    if (!p.drive.is_constant()) throw std::invalid_argument("time-function drives are not serializable");
    j = nlohmann::json{{"tau_v", p.tau_v}, {"tau_c", p.tau_c}, {"v_th", p.v_th},
                       {"v_r", p.v_r},     {"sigma", p.sigma}, {"drive", p.drive.level}};
}

void from_json(const nlohmann::json& j, NeuronParams& p) {
    j.at("tau_v").get_to(p.tau_v);
    j.at("tau_c").get_to(p.tau_c);
    j.at("v_th").get_to(p.v_th);
    j.at("v_r").get_to(p.v_r);
    j.at("sigma").get_to(p.sigma);
    p.drive = Drive{j.at("drive").get<double>(), {}};
}

nlohmann::json network_to_json(const NetworkSpec& net) {
    nlohmann::json j;
    j["n_neurons"] = net.size();
    j["params"] = net.params;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < net.weights.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(net.weights.cols()));
        for (Eigen::Index k = 0; k < net.weights.cols(); ++k) row[static_cast<std::size_t>(k)] = net.weights(i, k);
        rows.push_back(std::move(row));
    }
    j["weights"] = std::move(rows);
    j["excitatory"] = net.excitatory;
    if (net.layer_of) j["layer_of"] = *net.layer_of;
    else j["layer_of"] = nullptr;
    return j;
}

NetworkSpec network_from_json(const nlohmann::json& j) {
    NetworkSpec net;
    const auto n = j.at("n_neurons").get<std::size_t>();
    net.params = j.at("params").get<std::vector<NeuronParams>>();
    if (net.params.size() != n) throw std::invalid_argument("params length does not match n_neurons");
    const auto& rows = j.at("weights");
    if (rows.size() != n) throw std::invalid_argument("weights must have n_neurons rows");
    net.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (row.size() != n) throw std::invalid_argument("weights must be square");
        for (std::size_t k = 0; k < n; ++k) net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    if (j.contains("excitatory")) net.excitatory = j.at("excitatory").get<std::vector<bool>>();
    if (j.contains("layer_of") && !j.at("layer_of").is_null()) net.layer_of = j.at("layer_of").get<std::vector<int>>();
    net.validate();
    return net;
}

}  // namespace lifsim
