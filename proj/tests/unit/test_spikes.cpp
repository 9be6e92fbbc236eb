#include <doctest.h>

#include "lifsim/engine.hpp"
#include "lifsim/oracle.hpp"
#include "lifsim/random.hpp"
#include "lifsim/spikes.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace lifsim;

namespace {

SpikeTrain train(std::vector<double> t, int neuron = 0) {
    SpikeTrain s;
    s.neuron = neuron;
    s.times = std::move(t);
    return s;
}

}  // namespace

TEST_CASE("spike train basics") {
    const auto s = train({0.5, 1.0, 1.0 + 1e-12});
    CHECK(s.count_until(0.4) == 0);
    CHECK(s.count_until(1.0) == 2);
    CHECK(s.count_until(5.0) == 3);
    CHECK_NOTHROW(s.validate());
    CHECK_THROWS_AS(train({1.0, 1.0}).validate(), std::invalid_argument);
    SpikeTrain bad = train({1.0, 2.0});
    bad.speeds = {0.1};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_FALSE(bad.has_speeds());
}

TEST_CASE("match_trains") {
    SUBCASE("paired by index") {
        const auto m = match_trains(train({0.5, 1.2}), train({0.53125, 1.21875}), 2.0);
        CHECK(m.matched);
        REQUIRE(m.ste.size() == 2);
        CHECK(m.ste[0] == doctest::Approx(0.03125));
        CHECK(m.ste[1] == doctest::Approx(0.01875));
    }
    SUBCASE("missing numerical spike") {
        const auto m = match_trains(train({0.5}), train({}), 1.0);
        CHECK(m.horizon_mismatch());
        CHECK(m.ste.empty());
    }
    SUBCASE("boundary layer") {
        const auto m = match_trains(train({0.99}), train({1.01}), 1.0);
        CHECK(m.horizon_mismatch());
        CHECK(m.exact_count == 1);
        CHECK(m.numerical_count == 0);
    }
    SUBCASE("empty trains match") {
        const auto m = match_trains(train({}), train({}), 3.0);
        CHECK(m.matched);
        CHECK(m.ste.empty());
    }
    SUBCASE("spikes beyond the horizon are ignored") {
        const auto m = match_trains(train({0.4, 2.5}), train({0.45}), 2.0);
        CHECK(m.matched);
        CHECK(m.ste.size() == 1);
    }
    SUBCASE("symmetric up to sign") {
        const auto a = train({0.3, 0.9, 1.7});
        const auto b = train({0.31, 0.88, 1.75});
        const auto ab = match_trains(a, b, 2.0);
        const auto ba = match_trains(b, a, 2.0);
        CHECK(ab.matched == ba.matched);
        for (std::size_t k = 0; k < ab.ste.size(); ++k) CHECK(ab.ste[k] == -ba.ste[k]);
    }
}

TEST_CASE("match_network") {
    const std::vector<SpikeTrain> exact{train({0.5}, 0), train({0.7}, 1)};
    const std::vector<SpikeTrain> good{train({0.51}, 0), train({0.72}, 1)};
    const std::vector<SpikeTrain> bad{train({0.51}, 0), train({}, 1)};
    CHECK(match_network(exact, good, 1.0).network_matched);
    const auto m = match_network(exact, bad, 1.0);
    CHECK_FALSE(m.network_matched);
    CHECK(m.neurons[0].matched);
    CHECK_FALSE(m.neurons[1].matched);
    const auto j = to_json(m);
    CHECK(j["network_matched"] == false);
    CHECK(j["neurons"].size() == 2);
    CHECK_THROWS_AS(match_network(exact, std::vector<SpikeTrain>{}, 1.0), std::invalid_argument);
}

TEST_CASE("stepwise mismatch on (t_m, t_m + h] steps") {
    CHECK_FALSE(stepwise_mismatch(train({0.25, 0.75}), train({0.25, 0.75}), 0.25, 1.0));
    // 0.49 and 0.5 both lie in the step (0.25, 0.5].
    CHECK_FALSE(stepwise_mismatch(train({0.49}), train({0.5}), 0.25, 1.0));
    CHECK_FALSE(stepwise_mismatch(train({0.30}), train({0.40}), 0.25, 1.0));
    CHECK(stepwise_mismatch(train({0.49}), train({0.75}), 0.25, 1.0));
    CHECK(stepwise_mismatch(train({0.1, 0.2}), train({0.25}), 0.25, 1.0));
    // Spikes after the horizon are outside every step.
    CHECK_FALSE(stepwise_mismatch(train({0.5, 1.1}), train({0.5}), 0.25, 1.0));
}

TEST_CASE("stepwise agreement implies equal counts at every grid time") {
    std::mt19937_64 rng(77);
    const double h = 0.125;
    const double T = 4.0;
    int agreeing = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> a, b;
        for (int m = 0; m < 32; ++m) {
            const double u = uniform01(rng);
            if (u < 0.2) {
                const double lo = m * h;
                a.push_back(lo + h * (0.01 + 0.98 * uniform01(rng)));
                // Numerical spike registered at the step end, occasionally in the next step.
                b.push_back(uniform01(rng) < 0.02 && m < 31 ? (m + 2) * h : (m + 1) * h);
            }
        }
        std::vector<double> b_sorted;
        for (double t : b)
            if (b_sorted.empty() || t > b_sorted.back()) b_sorted.push_back(t);
        const auto sa = train(a);
        const auto sb = train(b_sorted);
        if (!stepwise_mismatch(sa, sb, h, T)) {
            ++agreeing;
            for (int m = 0; m <= 32; ++m) CHECK(sa.count_until(m * h) == sb.count_until(m * h));
        }
    }
    CHECK(agreeing > 100);
}

TEST_CASE("interlacing_check") {
    CHECK(interlacing_check(train({1, 3}), train({2, 4})) == 1);
    CHECK(interlacing_check(train({1, 3}), train({1, 3})) == 0);
    CHECK(interlacing_check(train({1, 2, 3}), train({4})) == 3);
    CHECK(interlacing_check(train({}), train({})) == 0);
}

TEST_CASE("interlacing of ordered deterministic IF pairs over 1000 inputs") {
    std::mt19937_64 rng(31415);
    std::int64_t worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double leak = 2.0 * uniform01(rng);
        const double mean = 0.5 + 1.5 * uniform01(rng);
        const double amp = 1.5 * uniform01(rng);
        const double freq = 0.5 + 4.0 * uniform01(rng);
        const double phase = 6.283185307179586 * uniform01(rng);
        const double x0 = 0.9 * uniform01(rng);
        const double y0 = x0 + (0.999 - x0) * uniform01(rng);
        const auto f = [leak](double x) { return -leak * x; };
        const auto input = [=](double t) { return mean + amp * std::sin(freq * t + phase); };
        const auto a = if_warmup_simulate(f, input, x0, 6.0, 1e-12, 2e-3);
        const auto b = if_warmup_simulate(f, input, y0, 6.0, 1e-12, 2e-3);
        worst = std::max(worst, interlacing_check(a, b));
    }
    CHECK(worst <= 1);
}

TEST_CASE("mismatch auxiliaries") {
    SUBCASE("boundary layer") {
        const auto aux = mismatch_auxiliaries(train({0.99, 3.0}), train({1.01, 3.0}), 1.0, 0.05);
        CHECK(aux.boundary_layer);
    }
    SUBCASE("dense pair") {
        const auto aux = mismatch_auxiliaries(train({0.2, 0.25, 3.0}), train({0.2, 0.25, 3.0}), 1.0, 0.05);
        CHECK(aux.dense_pair);
        CHECK_FALSE(aux.boundary_layer);
    }
    SUBCASE("large error") {
        const auto aux = mismatch_auxiliaries(train({0.2, 3.0}), train({0.4, 3.0}), 1.0, 0.05);
        CHECK(aux.large_error);
        CHECK(aux.any());
    }
    SUBCASE("unpaired numerical spike before the horizon") {
        const auto aux = mismatch_auxiliaries(train({0.2, 3.0}), train({0.2, 0.8, 3.0}), 1.0, 0.05);
        CHECK(aux.large_error);
    }
    SUBCASE("clean") {
        const auto aux = mismatch_auxiliaries(train({0.2, 0.6, 3.0}), train({0.21, 0.62, 3.0}), 1.0, 0.05);
        CHECK_FALSE(aux.any());
    }
    CHECK(default_mismatch_delta(1.0 / 64) == doctest::Approx(std::sqrt(std::log(64.0) / 64.0)));
    CHECK(default_mismatch_delta(1.0 / 64, 2.0) == doctest::Approx(2.0 * std::sqrt(std::log(64.0) / 64.0)));
    CHECK_THROWS_AS(default_mismatch_delta(1.5), std::invalid_argument);
}

TEST_CASE("count mismatch decomposition on sampled trajectories") {
    // Without auxiliary events, horizon counts always agree.
    NeuronParams p;
    p.sigma = 0.25;
    p.drive.level = 1.0;
    const auto net = build_recurrent({p}, Eigen::MatrixXd::Zero(1, 1));
    const double T = 5.0;
    const double extended = 6.0;
    const int factors[] = {1, 16, 32};
    int clean = 0;
    int mismatched = 0;
    for (int s = 0; s < 600; ++s) {
        const BrownianStore store(derive_seed(404, static_cast<std::uint64_t>(s)), 1.0 / 1024, 1024 * 6, 1);
        const auto ladder = simulate_ladder(net, store, factors, extended);
        for (std::size_t k = 1; k < 3; ++k) {
            const double delta = default_mismatch_delta(ladder[k].h);
            const auto aux = mismatch_auxiliaries(ladder[0].spikes[0], ladder[k].spikes[0], T, delta);
            const auto m = match_trains(ladder[0].spikes[0], ladder[k].spikes[0], T);
            if (!aux.any()) {
                ++clean;
                CHECK(m.matched);
            }
            if (!m.matched) {
                ++mismatched;
                CHECK(aux.any());
            }
        }
    }
    CHECK(clean > 50);
    CHECK(mismatched > 5);
}
