#include "lifsim/paths.hpp"

#include "lifsim/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lifsim {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

bool is_power_of_two(std::int64_t x) noexcept { return x > 0 && (x & (x - 1)) == 0; }

BrownianStore::BrownianStore(std::uint64_t seed, double h_fine, std::int64_t n_fine_steps, int n_neurons)
    : seed_(seed), h_fine_(h_fine), sqrt_h_(std::sqrt(h_fine)), n_fine_steps_(n_fine_steps), n_neurons_(n_neurons) {
    if (!(h_fine > 0.0) || !std::isfinite(h_fine)) throw std::invalid_argument("h_fine must be positive");
    if (n_fine_steps < 0) throw std::invalid_argument("n_fine_steps must be nonnegative");
    if (n_neurons < 0) throw std::invalid_argument("n_neurons must be nonnegative");
}

std::uint64_t BrownianStore::neuron_key(int neuron) const noexcept {
    return derive_seed(seed_, static_cast<std::uint64_t>(neuron));
}

void BrownianStore::check_range(int neuron, std::int64_t first, std::int64_t count) const {
    if (neuron < 0 || neuron >= n_neurons_) throw std::out_of_range("neuron index " + std::to_string(neuron) + " out of range");
    if (first < 0 || count < 0 || first + count > n_fine_steps_)
        throw std::out_of_range("fine step range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                                ") outside [0, " + std::to_string(n_fine_steps_) + ")");
}

void BrownianStore::check_factor(int factor) const {
    if (!is_power_of_two(factor)) throw std::invalid_argument("coarsening factor must be a power of two");
    if (n_fine_steps_ % factor != 0) throw std::invalid_argument("coarsening factor must divide the fine step count");
}

void BrownianStore::fine_increments(int neuron, std::int64_t first, std::span<double> out) const {
    const auto count = static_cast<std::int64_t>(out.size());
    check_range(neuron, first, count);
    const std::uint64_t key = neuron_key(neuron);
    std::int64_t m = first;
    std::size_t k = 0;
    while (k < out.size()) {
        const std::uint64_t pair = static_cast<std::uint64_t>(m) >> 1;
        const std::uint64_t base = key + (2 * pair) * kGamma;
        double z0 = 0.0;
        double z1 = 0.0;
        box_muller(splitmix64(base), splitmix64(base + kGamma), z0, z1);
        if ((m & 1) == 0) {
            out[k++] = z0 * sqrt_h_;
            ++m;
            if (k < out.size()) {
                out[k++] = z1 * sqrt_h_;
                ++m;
            }
        } else {
            out[k++] = z1 * sqrt_h_;
            ++m;
        }
    }
}

std::vector<double> BrownianStore::fine_increments(int neuron, std::int64_t first, std::int64_t count) const {
    if (count < 0) throw std::out_of_range("negative count");
    std::vector<double> out(static_cast<std::size_t>(count));
    fine_increments(neuron, first, out);
    return out;
}

double BrownianStore::coarsen(int factor, int neuron, std::int64_t coarse_step) const {
    double out = 0.0;
    coarse_increments(factor, neuron, coarse_step, std::span<double>(&out, 1));
    return out;
}

void BrownianStore::coarse_increments(int factor, int neuron, std::int64_t first, std::span<double> out) const {
    check_factor(factor);
    const auto count = static_cast<std::int64_t>(out.size());
    check_range(neuron, first * factor, count * factor);
    if (factor == 1) {
        fine_increments(neuron, first, out);
        return;
    }
    std::vector<double> fine(static_cast<std::size_t>(count * factor));
    fine_increments(neuron, first * factor, fine);
    block_sum(fine, factor, out);
}

void block_sum(std::span<const double> in, int factor, std::span<double> out) {
    if (factor < 1 || in.size() != out.size() * static_cast<std::size_t>(factor))
        throw std::invalid_argument("block_sum: size mismatch");
    const auto f = static_cast<std::size_t>(factor);
    for (std::size_t k = 0; k < out.size(); ++k) {
        double acc = in[k * f];
        for (std::size_t r = 1; r < f; ++r) acc += in[k * f + r];
        out[k] = acc;
    }
}

}  // namespace lifsim
