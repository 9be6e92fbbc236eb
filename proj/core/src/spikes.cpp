#include "lifsim/spikes.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace lifsim {

std::int64_t SpikeTrain::count_until(double t) const {
    return std::upper_bound(times.begin(), times.end(), t) - times.begin();
}

void SpikeTrain::validate() const {
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw std::invalid_argument("spike times must be strictly increasing");
    if (!speeds.empty() && speeds.size() != times.size())
        throw std::invalid_argument("crossing speeds must align with spike times");
}

NeuronMatch match_trains(const SpikeTrain& exact, const SpikeTrain& numerical, double horizon) {
    NeuronMatch m;
    m.neuron = exact.neuron;
    m.exact_count = exact.count_until(horizon);
    m.numerical_count = numerical.count_until(horizon);
    m.matched = m.exact_count == m.numerical_count;
    if (m.matched) {
        m.ste.resize(static_cast<std::size_t>(m.exact_count));
        for (std::size_t k = 0; k < m.ste.size(); ++k) m.ste[k] = numerical.times[k] - exact.times[k];
    }
    return m;
}

SpikeMatch match_network(std::span<const SpikeTrain> exact, std::span<const SpikeTrain> numerical, double horizon) {
    if (exact.size() != numerical.size()) throw std::invalid_argument("train lists differ in length");
    SpikeMatch out;
    out.neurons.reserve(exact.size());
    out.network_matched = true;
    for (std::size_t k = 0; k < exact.size(); ++k) {
        out.neurons.push_back(match_trains(exact[k], numerical[k], horizon));
        out.network_matched = out.network_matched && out.neurons.back().matched;
    }
    return out;
}

namespace {

// Index m of the step (t_m, t_{m+1}] containing t, i.e. ceil(t/h) - 1.
std::int64_t step_of(double t, double h) { return static_cast<std::int64_t>(std::ceil(t / h)) - 1; }

}  // namespace

bool stepwise_mismatch(const SpikeTrain& exact, const SpikeTrain& numerical, double h, double horizon) {
    if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
    const auto n_steps = static_cast<std::int64_t>(std::ceil(horizon / h - 1e-9));
    auto binned = [&](const SpikeTrain& s) {
        std::vector<std::int64_t> bins;
        for (double t : s.times) {
            if (t <= 0.0) continue;
            const std::int64_t m = step_of(t, h);
            if (m >= n_steps) break;
            bins.push_back(m);
        }
        return bins;
    };
    // Equal per-step counts is equivalent to equal sorted multisets of step indices.
    return binned(exact) != binned(numerical);
}

std::int64_t interlacing_check(const SpikeTrain& a, const SpikeTrain& b) {
    std::int64_t diff = 0;
    std::int64_t worst = 0;
    std::size_t ia = 0;
    std::size_t ib = 0;
    while (ia < a.times.size() || ib < b.times.size()) {
        const double ta = ia < a.times.size() ? a.times[ia] : INFINITY;
        const double tb = ib < b.times.size() ? b.times[ib] : INFINITY;
        const double t = std::min(ta, tb);
        // Apply every spike at time t before measuring, so simultaneous spikes cancel.
        while (ia < a.times.size() && a.times[ia] == t) ++diff, ++ia;
        while (ib < b.times.size() && b.times[ib] == t) --diff, ++ib;
        worst = std::max(worst, std::abs(diff));
    }
    return worst;
}

MismatchAuxiliaries mismatch_auxiliaries(const SpikeTrain& exact, const SpikeTrain& numerical,
                                         double horizon, double delta) {
    MismatchAuxiliaries aux;
    const auto& s = exact.times;
    aux.boundary_layer = exact.count_until(horizon + delta) - exact.count_until(horizon - delta) >= 1;
    for (std::size_t k = 0; k + 1 < s.size() && s[k] <= horizon + delta; ++k)
        if (s[k + 1] - s[k] <= 2.0 * delta) aux.dense_pair = true;
    // Indices with either spike before T + delta; an unpaired spike counts as an error above delta.
    const auto& n = numerical.times;
    for (std::size_t k = 0; (k < s.size() && s[k] <= horizon + delta) || (k < n.size() && n[k] <= horizon + delta); ++k) {
        if (k >= s.size() || k >= n.size() || std::abs(n[k] - s[k]) > delta) {
            aux.large_error = true;
            break;
        }
    }
    return aux;
}

double default_mismatch_delta(double h, double kappa) {
    if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("h must lie in (0, 1)");
    return kappa * std::sqrt(h * std::log(1.0 / h));
}

nlohmann::json to_json(const SpikeMatch& match) {
    nlohmann::json neurons = nlohmann::json::array();
    for (const auto& n : match.neurons) {
        neurons.push_back({{"neuron", n.neuron},
                           {"exact_count", n.exact_count},
                           {"numerical_count", n.numerical_count},
                           {"matched", n.matched},
                           {"ste", n.ste}});
    }
    return {{"network_matched", match.network_matched}, {"neurons", std::move(neurons)}};
}

}  // namespace lifsim
