#include <doctest.h>

#include "lifsim/paths.hpp"
#include "lifsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

using namespace lifsim;

namespace {

double sample_variance(const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Two-sided Kolmogorov-Smirnov statistic against the standard normal.
double ks_statistic(std::vector<double> z) {
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(z.size());
    double d = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double f = normal_cdf(z[k]);
        d = std::max({d, (static_cast<double>(k) + 1.0) / n - f, f - static_cast<double>(k) / n});
    }
    return d;
}

}  // namespace

TEST_CASE("power of two helper") {
    CHECK(is_power_of_two(1));
    CHECK(is_power_of_two(1024));
    CHECK_FALSE(is_power_of_two(0));
    CHECK_FALSE(is_power_of_two(12));
    CHECK_FALSE(is_power_of_two(-4));
}

TEST_CASE("fine increments are reproducible") {
    const BrownianStore a(42, 1.0 / 1024, 4096, 3);
    const BrownianStore b(42, 1.0 / 1024, 4096, 3);
    const auto x = a.fine_increments(1, 100, 500);
    const auto y = b.fine_increments(1, 100, 500);
    CHECK(x == y);
    // Overlapping windows with odd offsets agree on their intersection.
    const auto z = a.fine_increments(1, 101, 10);
    for (int k = 0; k < 10; ++k) CHECK(z[static_cast<std::size_t>(k)] == x[static_cast<std::size_t>(k + 1)]);
    const BrownianStore c(43, 1.0 / 1024, 4096, 3);
    CHECK(c.fine_increments(1, 100, 500) != x);
}

TEST_CASE("fine increment variance over a million draws") {
    const double h = 1.0 / 1024;
    const BrownianStore store(7, h, 1 << 20, 1);
    const auto x = store.fine_increments(0, 0, 1 << 20);
    // Relative standard error of the sample variance is sqrt(2/n) ~ 0.0014.
    CHECK(std::abs(sample_variance(x) / h - 1.0) < 0.01);
}

TEST_CASE("distinct neurons are uncorrelated") {
    const BrownianStore store(9, 1.0 / 1024, 100000, 2);
    const auto x = store.fine_increments(0, 0, 100000);
    const auto y = store.fine_increments(1, 0, 100000);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += x[k] * y[k];
        sxx += x[k] * x[k];
        syy += y[k] * y[k];
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.01);
}

TEST_CASE("Kolmogorov-Smirnov test of standardized increments") {
    const double h = 1.0 / 1024;
    const BrownianStore store(2718, h, 100000, 1);
    auto z = store.fine_increments(0, 0, 100000);
    for (double& v : z) v /= std::sqrt(h);
    // 1% critical value of the asymptotic Kolmogorov distribution.
    CHECK(ks_statistic(z) < 1.6276 / std::sqrt(static_cast<double>(z.size())));
}

TEST_CASE("coarsening") {
    const double h = 1.0 / 1024;
    const BrownianStore store(5, h, 1 << 13, 3);
    SUBCASE("factor one is the fine increment") {
        const auto fine = store.fine_increments(2, 0, 64);
        for (int m = 0; m < 64; ++m) CHECK(store.coarsen(1, 2, m) == fine[static_cast<std::size_t>(m)]);
    }
    SUBCASE("bitwise equal to the left-to-right block sum") {
        for (int factor : {2, 4, 32, 256}) {
            const std::int64_t n_coarse = store.n_fine_steps() / factor;
            for (int j = 0; j < 3; ++j) {
                const auto fine = store.fine_increments(j, 0, store.n_fine_steps());
                std::vector<double> coarse(static_cast<std::size_t>(n_coarse));
                store.coarse_increments(factor, j, 0, coarse);
                for (std::int64_t c = 0; c < n_coarse; ++c) {
                    double acc = 0.0;
                    for (int k = 0; k < factor; ++k) acc += fine[static_cast<std::size_t>(c * factor + k)];
                    CHECK(coarse[static_cast<std::size_t>(c)] == acc);
                    CHECK(store.coarsen(factor, j, c) == acc);
                }
            }
        }
    }
    SUBCASE("block_sum helper") {
        const std::vector<double> in{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
        std::vector<double> out(3);
        block_sum(in, 2, out);
        CHECK(out == std::vector<double>{3.0, 7.0, 11.0});
    }
    SUBCASE("total sum over the horizon at fixed order") {
        // Sum of coarse increments equals the fine sum taken block by block in the same order.
        const int factor = 32;
        const auto fine = store.fine_increments(0, 0, store.n_fine_steps());
        std::vector<double> coarse(static_cast<std::size_t>(store.n_fine_steps() / factor));
        store.coarse_increments(factor, 0, 0, coarse);
        double total_coarse = 0.0;
        for (double c : coarse) total_coarse += c;
        double total_fine = 0.0;
        for (std::size_t b = 0; b < coarse.size(); ++b) {
            double block = 0.0;
            for (int k = 0; k < factor; ++k) block += fine[b * factor + static_cast<std::size_t>(k)];
            total_fine += block;
        }
        CHECK(total_coarse == total_fine);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(store.coarsen(3, 0, 0), std::invalid_argument);
        CHECK_THROWS_AS(store.coarsen(0, 0, 0), std::invalid_argument);
        CHECK_THROWS_AS(store.coarsen(1 << 14, 0, 0), std::invalid_argument);
        CHECK_THROWS_AS(store.coarsen(2, 0, store.n_fine_steps()), std::out_of_range);
        CHECK_THROWS_AS(store.fine_increments(3, 0, 1), std::out_of_range);
        CHECK_THROWS_AS(store.fine_increments(0, -1, 1), std::out_of_range);
        CHECK_THROWS_AS(store.fine_increments(0, store.n_fine_steps(), 1), std::out_of_range);
        CHECK_THROWS_AS(BrownianStore(1, 0.0, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("coarse increment variance at factor 32") {
    const double h = 1.0 / 1024;
    const std::int64_t n_coarse = 100000;
    const BrownianStore store(31, h, 32 * n_coarse, 1);
    std::vector<double> coarse(static_cast<std::size_t>(n_coarse));
    store.coarse_increments(32, 0, 0, coarse);
    CHECK(std::abs(sample_variance(coarse) / (32.0 * h) - 1.0) < 0.01);
}

TEST_CASE("seed derivation") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));
    SplitMix64 a(3), b(3);
    for (int k = 0; k < 10; ++k) CHECK(a() == b());
    SplitMix64 rng(17);
    for (int k = 0; k < 1000; ++k) {
        const double u = uniform01(rng);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}
