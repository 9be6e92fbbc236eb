#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lifsim {

/// Per-neuron Brownian increments on a fine grid, regenerated on demand.
///
/// Increment (neuron j, fine step m) is a pure function of (seed, j, m): steps 2k and 2k+1
/// share one Box-Muller pair drawn from two counter-keyed SplitMix64 words. Nothing is stored,
/// so any thread may evaluate any range and memory stays flat for long horizons.
/// Coarse increments are block sums of fine ones in ascending fine-index order, which makes
/// every coarse step size a bitwise-exact coupling of the same path.
class BrownianStore {
public:
    BrownianStore(std::uint64_t seed, double h_fine, std::int64_t n_fine_steps, int n_neurons);

    std::uint64_t seed() const noexcept { return seed_; }
    double h_fine() const noexcept { return h_fine_; }
    std::int64_t n_fine_steps() const noexcept { return n_fine_steps_; }
    int n_neurons() const noexcept { return n_neurons_; }

    /// Fine increments for steps [first, first + out.size()). Throws std::out_of_range.
    void fine_increments(int neuron, std::int64_t first, std::span<double> out) const;
    std::vector<double> fine_increments(int neuron, std::int64_t first, std::int64_t count) const;

    /// Sum of the `factor` fine increments making up coarse step `coarse_step`.
    /// `factor` must be a power of two dividing n_fine_steps.
    double coarsen(int factor, int neuron, std::int64_t coarse_step) const;

    /// Coarse increments for coarse steps [first, first + out.size()).
    void coarse_increments(int factor, int neuron, std::int64_t first, std::span<double> out) const;

    /// Checks that `factor` is a power of two dividing the fine step count.
    void check_factor(int factor) const;

private:
    void check_range(int neuron, std::int64_t first, std::int64_t count) const;
    std::uint64_t neuron_key(int neuron) const noexcept;

    std::uint64_t seed_;
    double h_fine_;
    double sqrt_h_;
    std::int64_t n_fine_steps_;
    int n_neurons_;
};

/// Left-to-right block sums: out[k] = in[k*factor] + ... + in[k*factor + factor - 1].
void block_sum(std::span<const double> in, int factor, std::span<double> out);

bool is_power_of_two(std::int64_t x) noexcept;

}  // namespace lifsim
