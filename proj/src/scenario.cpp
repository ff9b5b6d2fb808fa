#include "qcdnet/scenario.hpp"

#include "qcdnet/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace qcdnet {

using nlohmann::json;

void Scenario::validate() const {
    net.validate();
    change.validate();
    obs.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument("alpha must lie in (0, 1)");
    }
    if (alpha >= 1.0 - change.rho) {
        throw InvalidArgument("alpha must be below 1 - rho; otherwise stopping at time 0 is optimal");
    }
    if (!(cost_c > 0.0)) {
        throw InvalidArgument("cost_c must be positive");
    }
    if (horizon_cap < 1) {
        throw InvalidArgument("horizon_cap must be positive");
    }
    if (episodes < 1 || calibration_episodes < 1) {
        throw InvalidArgument("episode counts must be positive");
    }
}

Scenario reference_scenario() {
    Scenario s;
    s.net = NetConfig{10, 34, 0.3636};
    s.change = ChangeSpec{0.0, 0.0005};
    s.obs = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    s.alpha = 0.01;
    return s;
}

namespace {

std::size_t line_of_offset(const std::string &text, std::size_t byte) {
    const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
    return 1 + static_cast<std::size_t>(std::count(text.begin(), end, '\n'));
}

void reject_unknown(const json &obj, const std::string &where, std::initializer_list<const char *> allowed) {
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto &item : obj.items()) {
        if (!keys.count(item.key())) {
            throw ConfigError("unknown field '" + where + item.key() + "'");
        }
    }
}

template <class T>
void read_field(const json &obj, const char *key, const std::string &where, T &out) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        out = it->template get<T>();
    } catch (const json::exception &) {
        throw ConfigError("field '" + where + key + "' has the wrong type (got " + it->type_name() + ")");
    }
}

const json &object_field(const json &root, const char *key, const std::string &where) {
    static const json empty = json::object();
    const auto it = root.find(key);
    if (it == root.end()) {
        return empty;
    }
    if (!it->is_object()) {
        throw ConfigError("field '" + where + key + "' must be an object");
    }
    return *it;
}

} // namespace

Scenario parse_scenario(const std::string &json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ConfigError("JSON syntax error at line " + std::to_string(line_of_offset(json_text, e.byte)) +
                          " (byte " + std::to_string(e.byte) + "): " + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("scenario file must hold a JSON object");
    }
    reject_unknown(root, "",
                   {"net", "change", "obs", "alpha", "cost_c", "horizon_cap", "seed", "episodes",
                    "calibration_episodes", "sojourn"});

    Scenario s = reference_scenario();

    const json &net = object_field(root, "net", "");
    reject_unknown(net, "net.", {"n_sensors", "period", "sigma"});
    read_field(net, "n_sensors", "net.", s.net.n_sensors);
    read_field(net, "period", "net.", s.net.period);
    read_field(net, "sigma", "net.", s.net.sigma);

    const json &change = object_field(root, "change", "");
    reject_unknown(change, "change.", {"rho", "p"});
    read_field(change, "rho", "change.", s.change.rho);
    read_field(change, "p", "change.", s.change.p);

    const json &obs = object_field(root, "obs", "");
    reject_unknown(obs, "obs.", {"family", "pre_mean", "pre_var", "post_mean", "post_var"});
    std::string family = std::string(to_string(s.obs.family));
    read_field(obs, "family", "obs.", family);
    try {
        s.obs.family = observation_family_from_string(family);
    } catch (const InvalidArgument &e) {
        throw ConfigError(std::string("field 'obs.family': ") + e.what());
    }
    read_field(obs, "pre_mean", "obs.", s.obs.pre_mean);
    read_field(obs, "pre_var", "obs.", s.obs.pre_var);
    read_field(obs, "post_mean", "obs.", s.obs.post_mean);
    read_field(obs, "post_var", "obs.", s.obs.post_var);

    read_field(root, "alpha", "", s.alpha);
    read_field(root, "cost_c", "", s.cost_c);
    read_field(root, "horizon_cap", "", s.horizon_cap);
    read_field(root, "seed", "", s.seed);
    read_field(root, "episodes", "", s.episodes);
    read_field(root, "calibration_episodes", "", s.calibration_episodes);

    const json &soj = object_field(root, "sojourn", "");
    reject_unknown(soj, "sojourn.", {"replications", "warmup_batches", "batches"});
    read_field(soj, "replications", "sojourn.", s.sojourn.replications);
    read_field(soj, "warmup_batches", "sojourn.", s.sojourn.warmup_batches);
    read_field(soj, "batches", "sojourn.", s.sojourn.batches);

    try {
        s.validate();
    } catch (const InvalidArgument &e) {
        throw ConfigError(e.what());
    }
    return s;
}

Scenario load_scenario(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario &s) {
    json j;
    j["net"] = {{"n_sensors", s.net.n_sensors}, {"period", s.net.period}, {"sigma", s.net.sigma}};
    j["change"] = {{"rho", s.change.rho}, {"p", s.change.p}};
    j["obs"] = {{"family", std::string(to_string(s.obs.family))},
                {"pre_mean", s.obs.pre_mean},
                {"pre_var", s.obs.pre_var},
                {"post_mean", s.obs.post_mean},
                {"post_var", s.obs.post_var}};
    j["alpha"] = s.alpha;
    j["cost_c"] = s.cost_c;
    j["horizon_cap"] = s.horizon_cap;
    j["seed"] = s.seed;
    j["episodes"] = s.episodes;
    j["calibration_episodes"] = s.calibration_episodes;
    j["sojourn"] = {{"replications", s.sojourn.replications},
                    {"warmup_batches", s.sojourn.warmup_batches},
                    {"batches", s.sojourn.batches}};
    return j.dump(2);
}

} // namespace qcdnet
