#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lifsim {

/// SplitMix64 finalizer. Used as a counter-keyed mixer and for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` under `seed`; stable across platforms and thread counts.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Small counter-based engine for short-lived per-sample streams.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    result_type operator()() noexcept {
        const std::uint64_t out = splitmix64(state_);
        state_ += 0x9E3779B97F4A7C15ULL;
        return out;
    }
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }

private:
    std::uint64_t state_;
};

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <class Engine>
double uniform01(Engine& rng) {
    return to_unit_interval(static_cast<std::uint64_t>(rng()));
}

/// Standard normal pair from two 64-bit words (Box-Muller). Written out so results do not
/// depend on the standard library's normal_distribution.
inline void box_muller(std::uint64_t a, std::uint64_t b, double& z0, double& z1) noexcept {
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = to_unit_interval(b);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(angle);
    z1 = r * std::sin(angle);
}

/// Sequential standard normal stream on top of any 64-bit engine.
template <class Engine>
class NormalStream {
public:
    explicit NormalStream(Engine& rng) : rng_(rng) {}
    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double z0 = 0.0;
        box_muller(static_cast<std::uint64_t>(rng_()), static_cast<std::uint64_t>(rng_()), z0, spare_);
        has_spare_ = true;
        return z0;
    }

private:
    Engine& rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lifsim
