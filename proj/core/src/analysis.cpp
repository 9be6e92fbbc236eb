#include "lifsim/analysis.hpp"

#include "lifsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace lifsim {

double psi(double x, double tau_c) {
    if (x < 0.0) throw std::invalid_argument("psi requires a nonnegative argument");
    const double s = -std::expm1(-x / tau_c);
    return s * s;
}

double kernel_l1_misalignment(double eps, double tau_c) {
    return 2.0 * tau_c * -std::expm1(-std::abs(eps) / tau_c);
}

double squared_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw std::invalid_argument("state vectors differ in size");
    return (a - b).squaredNorm();
}

double spike_impact(const SpikeMatch& match, double tau_c) {
    double total = 0.0;
    for (const auto& n : match.neurons)
        for (double e : n.ste) total += psi(std::abs(e), tau_c);
    return total;
}

MeanEstimate mean_estimate(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("at least two values required");
    MeanEstimate out;
    out.n = static_cast<std::int64_t>(values.size());
    double mean = 0.0;
    for (double x : values) mean += x;
    mean /= static_cast<double>(out.n);
    double ss = 0.0;
    for (double x : values) ss += (x - mean) * (x - mean);
    out.mean = mean;
    out.std_error = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
    return out;
}

StrongError matched_strong_error(std::span<const StrongSample> samples, double tau_c, std::int64_t min_pool) {
    StrongError out;
    out.n_samples = static_cast<std::int64_t>(samples.size());
    std::vector<double> gaps;
    std::vector<double> impacts;
    for (const auto& s : samples) {
        if (!s.match.network_matched) continue;
        gaps.push_back(squared_gap(s.coarse, s.reference));
        impacts.push_back(spike_impact(s.match, tau_c));
    }
    out.n_matched = static_cast<std::int64_t>(gaps.size());
    if (out.n_matched < std::max<std::int64_t>(1, min_pool))
        throw InsufficientPoolError("insufficient matched pool: " + std::to_string(out.n_matched) + " of " +
                                    std::to_string(out.n_samples) + " samples matched, " +
                                    std::to_string(std::max<std::int64_t>(1, min_pool)) + " required");
    out.matched_fraction = static_cast<double>(out.n_matched) / static_cast<double>(out.n_samples);
    if (gaps.size() == 1) {
        out.mse = gaps.front();
        out.impact_mean = impacts.front();
        return out;
    }
    const auto g = mean_estimate(gaps);
    const auto im = mean_estimate(impacts);
    out.mse = g.mean;
    out.mse_std_error = g.std_error;
    out.impact_mean = im.mean;
    out.impact_std_error = im.std_error;
    return out;
}

double readout_observable(const Snapshot& state, std::span<const SpikeTrain> trains, LayerRange layer,
                          const ReadoutCoefficients& coefs) {
    const int n = layer.size();
    if (n <= 0 || layer.end > state.v.size() || layer.end > static_cast<int>(trains.size()))
        throw std::invalid_argument("layer outside the trajectory");
    const double T = state.t;
    double mv = 0.0;
    double mi = 0.0;
    double rate = 0.0;
    for (int p = layer.begin; p < layer.end; ++p) {
        mv += state.v[p];
        mi += state.i[p];
        for (double s : trains[static_cast<std::size_t>(p)].times) {
            if (s > T) break;
            rate += std::exp(-(T - s) / coefs.filter_tau);
        }
    }
    mv /= n;
    mi /= n;
    rate /= n;
    return std::tanh(coefs.c_v * mv + coefs.c_i * mi + coefs.c_r * rate);
}

double readout_observable(const TrajectoryRecord& traj, LayerRange layer, const ReadoutCoefficients& coefs, double T) {
    const Snapshot* s = traj.at(T);
    if (s == nullptr) throw std::invalid_argument("no snapshot at t=" + std::to_string(T));
    return readout_observable(*s, traj.spikes, layer, coefs);
}

MeanEstimate weak_bias(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 2) throw std::invalid_argument("weak bias needs at least two paired samples");
    std::vector<double> diff;
    diff.reserve(pairs.size());
    for (const auto& [coarse, reference] : pairs) diff.push_back(coarse - reference);
    return mean_estimate(diff);
}

Proportion wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
    if (trials <= 0 || successes < 0 || successes > trials) throw std::invalid_argument("invalid binomial counts");
    Proportion out;
    out.successes = successes;
    out.trials = trials;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    out.estimate = p;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    out.lower = std::max(0.0, centre - half);
    out.upper = std::min(1.0, centre + half);
    return out;
}

MismatchProbability mismatch_probability(std::span<const SpikeMatch> samples, double z) {
    if (samples.empty()) throw std::invalid_argument("mismatch probability needs at least one sample");
    const std::size_t n = samples.front().neurons.size();
    std::vector<std::int64_t> per(n, 0);
    std::int64_t network = 0;
    for (const auto& s : samples) {
        if (s.neurons.size() != n) throw std::invalid_argument("samples cover different neuron sets");
        for (std::size_t p = 0; p < n; ++p)
            if (s.neurons[p].horizon_mismatch()) ++per[p];
        if (!s.network_matched) ++network;
    }
    const auto trials = static_cast<std::int64_t>(samples.size());
    MismatchProbability out;
    for (std::size_t p = 0; p < n; ++p) out.per_neuron.push_back(wilson_interval(per[p], trials, z));
    out.network = wilson_interval(network, trials, z);
    return out;
}

FluxHistogram::FluxHistogram(std::vector<double> edges, std::vector<double> mids)
    : edges_(std::move(edges)), mids_(std::move(mids)), counts_(edges_.size() - 1, 0) {}

FluxHistogram::FluxHistogram(std::vector<double> edges) {
    if (edges.size() < 2 || edges.front() < 0.0) throw std::invalid_argument("histogram needs >= 2 nonnegative edges");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1])) throw std::invalid_argument("histogram edges must increase");
    std::vector<double> mids;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        mids.push_back(edges[k] > 0.0 ? std::sqrt(edges[k] * edges[k + 1]) : 0.5 * edges[k + 1]);
    *this = FluxHistogram(std::move(edges), std::move(mids));
}

FluxHistogram FluxHistogram::geometric(double i_th, int bins, double lo_factor, double hi_factor) {
    if (bins < 1 || !(lo_factor > 0.0) || !(hi_factor > lo_factor) || !(i_th > 0.0))
        throw std::invalid_argument("invalid geometric histogram parameters");
    const double lo = lo_factor * i_th;
    const double ratio = std::pow(hi_factor / lo_factor, 1.0 / bins);
    std::vector<double> nominal(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) nominal[static_cast<std::size_t>(k)] = lo * std::pow(ratio, k);
    nominal.back() = hi_factor * i_th;
    std::vector<double> mids;
    for (int k = 0; k < bins; ++k)
        mids.push_back(std::sqrt(nominal[static_cast<std::size_t>(k)] * nominal[static_cast<std::size_t>(k) + 1]));
    nominal.front() = 0.0;
    return FluxHistogram(std::move(nominal), std::move(mids));
}

void FluxHistogram::add_train(const SpikeTrain& train, double horizon) {
    std::size_t n = 0;
    while (n < train.times.size() && train.times[n] <= horizon) ++n;
    if (n > 0 && train.speeds.size() < n) throw std::invalid_argument("train carries no crossing speeds");
    for (std::size_t k = 0; k < n; ++k) {
        const double a = train.speeds[k];
        if (!(a > edges_.front())) {
            ++nonpositive_;
            continue;
        }
        if (a > edges_.back()) {
            ++overflow_;
            continue;
        }
        const auto it = std::lower_bound(edges_.begin(), edges_.end(), a);
        ++counts_[static_cast<std::size_t>(it - edges_.begin()) - 1];
    }
    exposure_ += horizon;
}

void FluxHistogram::add_trains(std::span<const SpikeTrain> trains, double horizon) {
    for (const auto& t : trains) add_train(t, horizon);
}

void FluxHistogram::merge(const FluxHistogram& other) {
    if (other.edges_ != edges_) throw std::invalid_argument("histograms have different bins");
    for (std::size_t b = 0; b < counts_.size(); ++b) counts_[b] += other.counts_[b];
    overflow_ += other.overflow_;
    nonpositive_ += other.nonpositive_;
    exposure_ += other.exposure_;
}

double FluxHistogram::flux(std::size_t b) const {
    return exposure_ > 0.0 ? static_cast<double>(counts_[b]) / exposure_ : 0.0;
}

std::int64_t FluxHistogram::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

FluxHistogram crossing_speed_histogram(std::span<const SpikeTrain> trains, double horizon, FluxHistogram bins) {
    bins.add_trains(trains, horizon);
    return bins;
}

double histogram_integral(const FluxHistogram& hist, const std::function<double(double)>& phi) {
    double total = 0.0;
    for (std::size_t b = 0; b < hist.bins(); ++b)
        if (hist.counts()[b] > 0) total += hist.flux(b) * phi(hist.midpoint(b));
    return total;
}

OuProxyScales ou_proxy_scales(double tau_v, double tau_c, double sigma_eff) {
    if (!(sigma_eff > 0.0)) throw std::invalid_argument("sigma_eff must be positive");
    const double pi = 3.14159265358979323846;
    OuProxyScales out;
    out.rho_max = std::sqrt(tau_c) * (tau_c + tau_v) / (pi * sigma_eff * sigma_eff * std::pow(tau_v, 1.5));
    out.rho_v_max = std::sqrt(tau_c + tau_v) / (std::sqrt(pi) * sigma_eff * tau_v);
    return out;
}

double effective_sigma(double sigma_ext, double tau_c, std::span<const double> weights, std::span<const double> rates,
                       double kappa) {
    if (weights.size() != rates.size()) throw std::invalid_argument("one rate per weight required");
    double s = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (rates[j] < 0.0) throw std::invalid_argument("rates must be nonnegative");
        s += weights[j] * weights[j] * rates[j];
    }
    return std::sqrt(sigma_ext * sigma_ext + kappa * tau_c * tau_c * s);
}

OrderFit fit_order(std::span<const double> h, std::span<const double> error) {
    if (h.size() != error.size() || h.size() < 3) throw std::invalid_argument("fit_order needs >= 3 pairs");
    const std::size_t n = h.size();
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(h[k] > 0.0) || !(error[k] > 0.0)) throw std::invalid_argument("fit_order needs positive inputs");
        x[k] = std::log(h[k]);
        y[k] = std::log(error[k]);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_order needs distinct step sizes");
    OrderFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = y[k] - (out.intercept + out.slope * x[k]);
        out.residuals.push_back(r);
        rss += r * r;
    }
    out.slope_std_error = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
    return out;
}

std::vector<double> polylog_normalized_ratio(std::span<const double> h, std::span<const double> mse, int depth) {
    if (h.size() != mse.size()) throw std::invalid_argument("one value per step size required");
    std::vector<double> out;
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (!(h[k] > 0.0 && h[k] < 1.0)) throw std::invalid_argument("step sizes must lie in (0, 1)");
        out.push_back(mse[k] / h[k] / std::pow(1.0 + std::abs(std::log(h[k])), depth));
    }
    return out;
}

bool polylog_ratio_test(std::span<const double> h, std::span<const double> mse, int depth, double slack) {
    const auto q = polylog_normalized_ratio(h, mse, depth);
    std::vector<std::size_t> order(h.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (q[order[k]] > q[order[k - 1]] * (1.0 + slack)) return false;
    return true;
}

void ErrorSummary::add(double h, int depth, double T, std::string metric, double value, double std_error) {
    rows.push_back(SummaryRow{h, depth, T, std::move(metric), value, std_error});
}

const SummaryRow* ErrorSummary::find(double h, int depth, double T, const std::string& metric) const {
    for (const auto& r : rows)
        if (r.h == h && r.depth == depth && r.T == T && r.metric == metric) return &r;
    return nullptr;
}

void write_summary_csv(std::ostream& os, const ErrorSummary& summary) {
    os << "h,depth,T,metric,value,std_error\n";
    os.precision(17);
    for (const auto& r : summary.rows)
        os << r.h << ',' << r.depth << ',' << r.T << ',' << r.metric << ',' << r.value << ',' << r.std_error << '\n';
}

void write_flux_csv(std::ostream& os, const FluxHistogram& hist) {
    os << "lower,upper,midpoint,count,flux\n";
    os.precision(17);
    for (std::size_t b = 0; b < hist.bins(); ++b)
        os << hist.edges()[b] << ',' << hist.edges()[b + 1] << ',' << hist.midpoint(b) << ',' << hist.counts()[b] << ','
           << hist.flux(b) << '\n';
    os << hist.edges().back() << ",inf,," << hist.overflow() << ','
       << (hist.exposure() > 0.0 ? static_cast<double>(hist.overflow()) / hist.exposure() : 0.0) << '\n';
}

}  // namespace lifsim
