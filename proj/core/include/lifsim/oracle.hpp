#pragma once

#include "lifsim/model.hpp"
#include "lifsim/spikes.hpp"

#include <cstdint>
#include <functional>

namespace lifsim {

/// Gap process started at R = -d with current J = a:
/// dR = (J - R / tau_v) du,  dJ = -(J - a) / tau_c du + sigma / tau_c dW, stopped when R reaches 0.
struct CatchupProblem {
    double d = 0.01;
    double a = 1.0;
    double sigma = 0.0;
    double tau_v = 1.0;
    double tau_c = 1.0;
    std::int64_t n_samples = 100000;
    double inner_step = 0.0;   ///< 0 selects 1e-3 * min(d / a, tau_v)
    double cap_factor = 1e3;   ///< paths still below 0 at cap_factor * d / a are censored
    std::uint64_t seed = 1;

    void validate() const;
};

struct CatchupResult {
    double m1 = 0.0;
    double m2 = 0.0;
    double m1_std_error = 0.0;
    double m2_std_error = 0.0;
    std::int64_t n_used = 0;
    std::int64_t n_censored = 0;
};

/// Euler Monte Carlo estimate of the first two moments of the passage time; censored paths are excluded
/// from the moments and counted. Sample k uses the stream derive_seed(seed, k).
CatchupResult catchup_first_passage_mc(const CatchupProblem& problem);

/// tau_v log(i0 / (i0 - i_th)), the first passage from v_r under constant current i0.
/// Throws std::domain_error for i0 <= i_th.
double closed_form_spike_time(double i0, const NeuronParams& params);

/// Normalized IF unit x' = f(x) + I(t) on [0, 1) with reset to 0 at 1, integrated by classical RK4
/// with step dt; threshold hits are located by bisection on the partial step to within tol.
SpikeTrain if_warmup_simulate(const std::function<double(double)>& f, const std::function<double(double)>& input,
                              double x0, double horizon, double tol = 1e-12, double dt = 1e-3);

}  // namespace lifsim
