#include "lifsim/config.hpp"

#include "lifsim/errors.hpp"
#include "lifsim/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lifsim {

namespace {

using json = nlohmann::json;

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

/// Reads fields of one JSON object and remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        out = convert<T>(j_.at(key), join(path_, key));
    }

    const json& object(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return join(path_, key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown field");
    }

    template <class T>
    static T convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) return v.get<T>();
                if (v.get<std::int64_t>() < 0) throw ConfigError(where, "expected a nonnegative integer");
            }
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where, "expected a number");
            return v.get<T>();
        } else {
            // std::vector<U>
            if (!v.is_array()) throw ConfigError(where, "expected an array");
            T out;
            for (std::size_t k = 0; k < v.size(); ++k)
                out.push_back(convert<typename T::value_type>(v[k], where + "[" + std::to_string(k) + "]"));
            return out;
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) throw ConfigError(path, message);
}

bool is_multiple(double x, double q) {
    const double r = x / q;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

}  // namespace

void ScenarioConfig::validate(bool require_drives) const {
    const auto& n = network;
    require(n.depth >= 1, "network.depth", "must be >= 1");
    require(n.width >= 1, "network.width", "must be >= 1");
    require(n.n_exc >= 0 && n.n_inh >= 0 && n.n_exc + n.n_inh == n.width, "network.n_exc",
            "n_exc + n_inh must equal the width");
    require(n.p_conn > 0.0 && n.p_conn <= 1.0, "network.p_conn", "must lie in (0, 1]");
    require(n.c_w >= 0.0, "network.c_w", "must be nonnegative");
    require(n.tau_v > 0.0, "network.tau_v", "must be positive");
    require(n.tau_c > 0.0, "network.tau_c", "must be positive");
    require(n.v_r < n.v_th, "network.v_r", "must be below v_th");
    require(n.sigma >= 0.0, "network.sigma", "must be nonnegative");
    if (n.drives) {
        require(n.drives->size() == 1 || static_cast<int>(n.drives->size()) == n.depth, "network.drives",
                "needs one entry or one entry per layer");
        for (double b : *n.drives) require(std::isfinite(b), "network.drives", "entries must be finite");
    } else {
        require(!require_drives, "network.drives",
                "required: set one drive level per layer (the calibrate command can propose values)");
    }

    require(grid.h_ref > 0.0, "grid.h_ref", "must be positive");
    require(!grid.h.empty(), "grid.h", "needs at least one coarse step");
    for (std::size_t k = 0; k < grid.h.size(); ++k) {
        const std::string where = "grid.h[" + std::to_string(k) + "]";
        require(grid.h[k] > grid.h_ref, where, "must exceed h_ref");
        const double r = grid.h[k] / grid.h_ref;
        require(is_multiple(grid.h[k], grid.h_ref) && is_power_of_two(std::llround(r)), where,
                "must be a power-of-two multiple of h_ref");
    }
    require(!grid.checkpoints.empty(), "grid.checkpoints", "needs at least one time");
    for (double t : grid.checkpoints) require(t > 0.0, "grid.checkpoints", "times must be positive");

    require(pools.strong_min >= 1, "pools.strong_min", "must be >= 1");
    require(pools.strong_max >= pools.strong_min, "pools.strong_max", "must be >= strong_min");
    require(pools.matched_floor >= 1, "pools.matched_floor", "must be >= 1");
    require(pools.weak_min >= 2, "pools.weak_min", "must be >= 2");
    require(pools.weak_max >= pools.weak_min, "pools.weak_max", "must be >= weak_min");
    require(pools.batch >= 1, "pools.batch", "must be >= 1");
    require(observable.filter_tau > 0.0, "observable.filter_tau", "must be positive");

    for (int d : strong_depths) require(d >= 1 && d <= n.depth, "depths.strong", "entries must lie in [1, depth]");
    for (int d : weak_depths) require(d >= 1 && d <= n.depth, "depths.weak", "entries must lie in [1, depth]");

    require(lyapunov.horizon > 0.0, "lyapunov.horizon", "must be positive");
    require(lyapunov.constant_current > 1.0, "lyapunov.constant_current", "must exceed 1 (suprathreshold)");
    require(lyapunov.flux_trains >= 2, "lyapunov.flux_trains", "must be >= 2");
    require(lyapunov.two_copy_runs >= 2, "lyapunov.two_copy_runs", "must be >= 2");
    require(lyapunov.renorm_interval > 0.0, "lyapunov.renorm_interval", "must be positive");
    require(!output.empty(), "output", "must not be empty");
}

ScenarioConfig preset(const std::string& name) {
    ScenarioConfig cfg;
    if (name == "base") {
        cfg.name = "base";
        cfg.network.tau_c = 0.20;
        cfg.network.c_w = 0.18;
    } else if (name == "strong-coupling") {
        cfg.name = "strong-coupling";
        cfg.network.tau_c = 0.35;
        cfg.network.c_w = 1.2 * 0.18;
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "' (expected base or strong-coupling)");
    }
    return cfg;
}

json to_json(const ScenarioConfig& cfg) {
    const auto& n = cfg.network;
    json net = {{"depth", n.depth}, {"width", n.width}, {"n_exc", n.n_exc}, {"n_inh", n.n_inh},
                {"p_conn", n.p_conn}, {"c_w", n.c_w}, {"tau_v", n.tau_v}, {"tau_c", n.tau_c},
                {"v_th", n.v_th}, {"v_r", n.v_r}, {"sigma", n.sigma}};
    net["drives"] = n.drives ? json(*n.drives) : json(nullptr);
    return json{
        {"name", cfg.name},
        {"network", net},
        {"grid", {{"h_ref", cfg.grid.h_ref}, {"h", cfg.grid.h}, {"checkpoints", cfg.grid.checkpoints}}},
        {"pools",
         {{"strong_min", cfg.pools.strong_min}, {"strong_max", cfg.pools.strong_max},
          {"matched_floor", cfg.pools.matched_floor}, {"weak_min", cfg.pools.weak_min},
          {"weak_max", cfg.pools.weak_max}, {"batch", cfg.pools.batch}}},
        {"observable",
         {{"c_v", cfg.observable.c_v}, {"c_i", cfg.observable.c_i}, {"c_r", cfg.observable.c_r},
          {"filter_tau", cfg.observable.filter_tau}}},
        {"depths", {{"strong", cfg.strong_depths}, {"weak", cfg.weak_depths}}},
        {"lyapunov",
         {{"horizon", cfg.lyapunov.horizon}, {"constant_current", cfg.lyapunov.constant_current},
          {"noisy_drive", cfg.lyapunov.noisy_drive}, {"flux_trains", cfg.lyapunov.flux_trains},
          {"two_copy_runs", cfg.lyapunov.two_copy_runs}, {"renorm_interval", cfg.lyapunov.renorm_interval}}},
        {"seed", cfg.seed},
        {"network_seed", cfg.network_seed},
        {"output", cfg.output},
    };
}

ScenarioConfig config_from_json(const json& doc, bool require_drives) {
    ObjectReader root(doc, "");
    ScenarioConfig cfg;
    std::string base;
    root.read("preset", base);
    if (!base.empty()) cfg = preset(base);
    root.read("name", cfg.name);
    if (root.has("network")) {
        ObjectReader r(root.object("network"), "network");
        auto& n = cfg.network;
        r.read("depth", n.depth);
        r.read("width", n.width);
        r.read("n_exc", n.n_exc);
        r.read("n_inh", n.n_inh);
        r.read("p_conn", n.p_conn);
        r.read("c_w", n.c_w);
        r.read("tau_v", n.tau_v);
        r.read("tau_c", n.tau_c);
        r.read("v_th", n.v_th);
        r.read("v_r", n.v_r);
        r.read("sigma", n.sigma);
        if (r.has("drives")) {
            const json& d = r.object("drives");
            if (d.is_null()) n.drives.reset();
            else if (d.is_number()) n.drives = std::vector<double>{d.get<double>()};
            else n.drives = ObjectReader::convert<std::vector<double>>(d, "network.drives");
        }
        r.finish();
    }
    if (root.has("grid")) {
        ObjectReader r(root.object("grid"), "grid");
        r.read("h_ref", cfg.grid.h_ref);
        r.read("h", cfg.grid.h);
        r.read("checkpoints", cfg.grid.checkpoints);
        r.finish();
    }
    if (root.has("pools")) {
        ObjectReader r(root.object("pools"), "pools");
        r.read("strong_min", cfg.pools.strong_min);
        r.read("strong_max", cfg.pools.strong_max);
        r.read("matched_floor", cfg.pools.matched_floor);
        r.read("weak_min", cfg.pools.weak_min);
        r.read("weak_max", cfg.pools.weak_max);
        r.read("batch", cfg.pools.batch);
        r.finish();
    }
    if (root.has("observable")) {
        ObjectReader r(root.object("observable"), "observable");
        r.read("c_v", cfg.observable.c_v);
        r.read("c_i", cfg.observable.c_i);
        r.read("c_r", cfg.observable.c_r);
        r.read("filter_tau", cfg.observable.filter_tau);
        r.finish();
    }
    if (root.has("depths")) {
        ObjectReader r(root.object("depths"), "depths");
        r.read("strong", cfg.strong_depths);
        r.read("weak", cfg.weak_depths);
        r.finish();
    }
    if (root.has("lyapunov")) {
        ObjectReader r(root.object("lyapunov"), "lyapunov");
        r.read("horizon", cfg.lyapunov.horizon);
        r.read("constant_current", cfg.lyapunov.constant_current);
        r.read("noisy_drive", cfg.lyapunov.noisy_drive);
        r.read("flux_trains", cfg.lyapunov.flux_trains);
        r.read("two_copy_runs", cfg.lyapunov.two_copy_runs);
        r.read("renorm_interval", cfg.lyapunov.renorm_interval);
        r.finish();
    }
    root.read("seed", cfg.seed);
    root.read("network_seed", cfg.network_seed);
    root.read("output", cfg.output);
    root.finish();
    cfg.validate(require_drives);
    return cfg;
}

ScenarioConfig load_config(const std::string& path, bool require_drives) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open configuration file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(doc, require_drives);
}

SnappedTimes snap_times(const std::vector<double>& times, double quantum) {
    if (!(quantum > 0.0)) throw std::invalid_argument("snap quantum must be positive");
    SnappedTimes out;
    out.requested = times;
    for (double t : times) {
        const double s = std::max(1.0, std::round(t / quantum)) * quantum;
        out.max_distance = std::max(out.max_distance, std::abs(s - t));
        out.snapped.push_back(s);
    }
    std::sort(out.snapped.begin(), out.snapped.end());
    out.snapped.erase(std::unique(out.snapped.begin(), out.snapped.end()), out.snapped.end());
    return out;
}

NetworkSpec build_network(const ScenarioConfig& cfg) {
    cfg.validate(true);
    const auto& n = cfg.network;
    std::vector<NeuronParams> layers;
    for (int l = 0; l < n.depth; ++l) {
        NeuronParams p;
        p.tau_v = n.tau_v;
        p.tau_c = n.tau_c;
        p.v_th = n.v_th;
        p.v_r = n.v_r;
        p.sigma = n.sigma;
        p.drive.level = n.drives->size() == 1 ? n.drives->front() : (*n.drives)[static_cast<std::size_t>(l)];
        layers.push_back(p);
    }
    WeightArgs w;
    w.p_conn = n.p_conn;
    w.c_w = n.c_w;
    w.n_exc = n.n_exc;
    w.n_inh = n.n_inh;
    return build_feedforward(n.depth, n.width, layers, w, cfg.network_seed);
}

std::string config_hash(const ScenarioConfig& cfg) {
    auto doc = to_json(cfg);
    doc.erase("output");  // the destination does not change results
    const std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lifsim
