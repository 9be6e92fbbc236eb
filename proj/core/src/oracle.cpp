#include "lifsim/oracle.hpp"

#include "lifsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lifsim {

void CatchupProblem::validate() const {
    if (!(d >= 0.0)) throw std::invalid_argument("catch-up gap d must be nonnegative");
    if (!(a > 0.0)) throw std::invalid_argument("catch-up speed a must be positive");
    if (!(sigma >= 0.0) || !(tau_v > 0.0) || !(tau_c > 0.0)) throw std::invalid_argument("invalid catch-up parameters");
    if (n_samples < 1) throw std::invalid_argument("catch-up needs at least one sample");
    if (inner_step < 0.0 || !(cap_factor > 1.0)) throw std::invalid_argument("invalid catch-up step or cap");
}

CatchupResult catchup_first_passage_mc(const CatchupProblem& pr) {
    pr.validate();
    CatchupResult out;
    if (pr.d == 0.0) {
        out.n_used = pr.n_samples;
        return out;
    }
    const double scale = pr.d / pr.a;
    const double h = pr.inner_step > 0.0 ? pr.inner_step : 1e-3 * std::min(scale, pr.tau_v);
    const double cap = pr.cap_factor * scale;
    const auto max_steps = static_cast<std::int64_t>(std::ceil(cap / h));
    const double sqrt_h = std::sqrt(h);
    const double noise = pr.sigma / pr.tau_c * sqrt_h;

    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (std::int64_t k = 0; k < pr.n_samples; ++k) {
        SplitMix64 rng(derive_seed(pr.seed, static_cast<std::uint64_t>(k)));
        NormalStream<SplitMix64> normal(rng);
        double r = -pr.d;
        double j = pr.a;
        double passage = -1.0;
        for (std::int64_t m = 0; m < max_steps; ++m) {
            const double r_new = r + h * (j - r / pr.tau_v);
            const double j_new = j - h * (j - pr.a) / pr.tau_c + (noise > 0.0 ? noise * normal() : 0.0);
            if (r_new >= 0.0) {
                // Linear interpolation inside the final step.
                passage = (static_cast<double>(m) + (-r) / (r_new - r)) * h;
                break;
            }
            r = r_new;
            j = j_new;
        }
        if (passage < 0.0) {
            ++out.n_censored;
            continue;
        }
        const double p2 = passage * passage;
        s1 += passage;
        s2 += p2;
        s4 += p2 * p2;
        ++out.n_used;
    }
    if (out.n_used == 0) return out;
    const double n = static_cast<double>(out.n_used);
    out.m1 = s1 / n;
    out.m2 = s2 / n;
    if (out.n_used > 1) {
        out.m1_std_error = std::sqrt(std::max(0.0, (s2 - n * out.m1 * out.m1) / (n - 1.0) / n));
        out.m2_std_error = std::sqrt(std::max(0.0, (s4 - n * out.m2 * out.m2) / (n - 1.0) / n));
    }
    return out;
}

double closed_form_spike_time(double i0, const NeuronParams& params) {
    const double i_th = threshold_current(params);
    if (!(i0 > i_th)) throw std::domain_error("constant current at or below threshold never spikes");
    return params.tau_v * std::log(i0 / (i0 - i_th));
}

namespace {

double rk4(const std::function<double(double)>& f, const std::function<double(double)>& input, double t, double x,
           double h) {
    const auto rhs = [&](double s, double y) { return f(y) + input(s); };
    const double k1 = rhs(t, x);
    const double k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const double k4 = rhs(t + h, x + h * k3);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

SpikeTrain if_warmup_simulate(const std::function<double(double)>& f, const std::function<double(double)>& input,
                              double x0, double horizon, double tol, double dt) {
    if (!(x0 >= 0.0 && x0 < 1.0)) throw std::invalid_argument("x0 must lie in [0, 1)");
    if (!(dt > 0.0) || !(tol > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("invalid integration settings");
    SpikeTrain train;
    double t = 0.0;
    double x = x0;
    while (t < horizon) {
        const double h = std::min(dt, horizon - t);
        const double x_new = rk4(f, input, t, x, h);
        if (!std::isfinite(x_new)) throw std::runtime_error("non-finite IF state");
        if (x_new < 1.0) {
            t += h;
            x = x_new;
            continue;
        }
        double lo = 0.0;
        double hi = h;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (rk4(f, input, t, x, mid) >= 1.0) hi = mid;
            else lo = mid;
        }
        t += hi;
        if (!train.times.empty() && !(t > train.times.back())) throw std::runtime_error("IF event location failed");
        train.times.push_back(t);
        x = 0.0;
    }
    return train;
}

}  // namespace lifsim
