#include "crowdswap/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "crowdswap/error.hpp"

namespace crowdswap::config {

namespace {

int line_of(const YAML::Node& n) {
    const auto mark = n.Mark();
    return mark.line >= 0 ? mark.line + 1 : -1;
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

// Remembers where each field was written so validation errors can point at it.
struct Reader {
    std::filesystem::path base_dir;
    std::map<std::string, int> lines;

    void check_keys(const YAML::Node& node, const std::string& path,
                    std::initializer_list<const char*> allowed) const {
        if (!node.IsMap())
            throw ConfigError(path, "expected a mapping", line_of(node));
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!ok.contains(key))
                throw ConfigError(path.empty() ? key : path + "." + key, "unknown key",
                                  line_of(kv.first));
        }
    }

    template <typename T>
    bool get(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
        const auto n = parent[key];
        if (!n)
            return false;
        const std::string field = join(path, key);
        lines[field] = line_of(n);
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(field, "wrong type", line_of(n));
        }
        return true;
    }

    bool get_number(const YAML::Node& parent, const char* key, const std::string& path,
                    double& out) {
        const auto n = parent[key];
        if (n && n.IsScalar()) {
            const auto s = n.Scalar();
            if (s == "inf" || s == ".inf" || s == "infinity") {
                lines[join(path, key)] = line_of(n);
                out = std::numeric_limits<double>::infinity();
                return true;
            }
        }
        return get(parent, key, path, out);
    }

    std::string path_value(const std::string& raw) const {
        if (raw.empty())
            return raw;
        std::filesystem::path p(raw);
        if (p.is_relative() && !base_dir.empty())
            p = base_dir / p;
        return p.string();
    }

    geo::Location location(const YAML::Node& n, const std::string& field) {
        if (!n.IsSequence() || n.size() != 2)
            throw ConfigError(field, "expected [lat, lon]", line_of(n));
        lines[field] = line_of(n);
        try {
            geo::Location loc{n[0].as<double>(), n[1].as<double>()};
            if (!geo::is_valid(loc))
                throw ConfigError(field, "invalid coordinates", line_of(n));
            return loc;
        } catch (const YAML::Exception&) {
            throw ConfigError(field, "wrong type", line_of(n));
        }
    }

    void area(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "area";
        check_keys(n, path, {"type", "center", "width_m", "height_m", "radius_m", "min_lat",
                             "min_lon", "max_lat", "max_lon"});
        std::string type = "rect";
        get(n, "type", path, type);
        try {
            if (type == "disc") {
                if (!n["center"] || !n["radius_m"])
                    throw ConfigError(path, "disc needs center and radius_m", line_of(n));
                double r = 0.0;
                get_number(n, "radius_m", path, r);
                if (!(r > 0.0))
                    throw ConfigError("area.radius_m", "must be positive", lines["area.radius_m"]);
                s.area = geo::Area::disc(location(n["center"], "area.center"), r);
            } else if (type == "rect") {
                if (n["center"]) {
                    double w = 0.0, h = 0.0;
                    if (!get_number(n, "width_m", path, w) || !get_number(n, "height_m", path, h))
                        throw ConfigError(path, "rect by center needs width_m and height_m",
                                          line_of(n));
                    s.area = geo::Area::rect(
                        geo::BBox::around(location(n["center"], "area.center"), w, h));
                } else {
                    geo::BBox b;
                    if (!get_number(n, "min_lat", path, b.min_lat) ||
                        !get_number(n, "min_lon", path, b.min_lon) ||
                        !get_number(n, "max_lat", path, b.max_lat) ||
                        !get_number(n, "max_lon", path, b.max_lon))
                        throw ConfigError(path, "rect needs center or all four bounds", line_of(n));
                    s.area = geo::Area::rect(b);
                }
            } else {
                throw ConfigError("area.type", "expected rect or disc", line_of(n["type"]));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(path, e.what(), line_of(n));
        }
    }

    void grid(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "grid";
        check_keys(n, path, {"cell_size_m", "update_period_s", "initial_state", "transition"});
        get_number(n, "cell_size_m", path, s.grid.cell_size_m);
        get_number(n, "update_period_s", path, s.grid.update_period_s);
        std::string init;
        if (get(n, "initial_state", path, init)) {
            const auto st = geo::parse_traffic_state(init);
            if (!st)
                throw ConfigError("grid.initial_state", "expected Normal, Slow or Jam",
                                  lines["grid.initial_state"]);
            s.grid.initial = *st;
        }
        if (const auto t = n["transition"]) {
            lines["grid.transition"] = line_of(t);
            if (!t.IsSequence() || t.size() != 3)
                throw ConfigError("grid.transition", "expected a 3x3 matrix", line_of(t));
            for (std::size_t i = 0; i < 3; ++i) {
                if (!t[i].IsSequence() || t[i].size() != 3)
                    throw ConfigError("grid.transition", "expected a 3x3 matrix", line_of(t[i]));
                for (std::size_t j = 0; j < 3; ++j) {
                    try {
                        s.grid.transition[i][j] = t[i][j].as<double>();
                    } catch (const YAML::Exception&) {
                        throw ConfigError("grid.transition", "wrong type", line_of(t[i][j]));
                    }
                }
            }
        }
    }

    std::array<double, 3> per_mode(const YAML::Node& n, const std::string& field,
                                   std::array<double, 3> v) {
        check_keys(n, field, {"walk", "bike", "motorbike"});
        lines[field] = line_of(n);
        get_number(n, "walk", field, v[0]);
        get_number(n, "bike", field, v[1]);
        get_number(n, "motorbike", field, v[2]);
        return v;
    }

    void workers(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "workers";
        check_keys(n, path, {"traces_path", "count", "mode_mix", "min_legs", "max_legs",
                             "sample_interval_s"});
        std::string p;
        if (get(n, "traces_path", path, p))
            s.workers.traces_path = path_value(p);
        get(n, "count", path, s.workers.count);
        if (n["mode_mix"])
            s.workers.mode_mix = per_mode(n["mode_mix"], "workers.mode_mix", s.workers.mode_mix);
        get(n, "min_legs", path, s.workers.synth.min_legs);
        get(n, "max_legs", path, s.workers.synth.max_legs);
        lines["workers.legs"] = lines.contains("workers.min_legs") ? lines["workers.min_legs"]
                                                                   : lines["workers.max_legs"];
        get_number(n, "sample_interval_s", path, s.workers.synth.sample_interval_s);
    }

    void tasks(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "tasks";
        check_keys(n, path, {"path", "rate_per_hour", "total", "deadline_s", "reward", "penalty",
                             "chain_length", "chain_spacing_m"});
        std::string p;
        if (get(n, "path", path, p)) {
            s.tasks_path = path_value(p);
            lines["tasks_path"] = lines["tasks.path"];
        }
        get_number(n, "rate_per_hour", path, s.tasks.rate_per_hour);
        get(n, "total", path, s.tasks.total);
        get_number(n, "deadline_s", path, s.tasks.deadline_s);
        get_number(n, "reward", path, s.tasks.reward);
        get_number(n, "penalty", path, s.tasks.penalty);
        get(n, "chain_length", path, s.tasks.chain_length);
        get_number(n, "chain_spacing_m", path, s.tasks.chain_spacing_m);
    }

    void incidents(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "incidents";
        check_keys(n, path, {"probability", "period_s", "min_duration_s", "max_duration_s"});
        get_number(n, "probability", path, s.incidents.probability);
        get_number(n, "period_s", path, s.incidents.period_s);
        get_number(n, "min_duration_s", path, s.incidents.min_duration_s);
        get_number(n, "max_duration_s", path, s.incidents.max_duration_s);
        lines["incidents.duration_s"] = lines.contains("incidents.min_duration_s")
                                            ? lines["incidents.min_duration_s"]
                                            : lines["incidents.max_duration_s"];
    }

    void agents(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "agents";
        check_keys(n, path, {"motorbike_normal_mps", "motorbike_slow_mps", "service_radius_m"});
        get_number(n, "motorbike_normal_mps", path, s.move.moto.normal_mps);
        get_number(n, "motorbike_slow_mps", path, s.move.moto.slow_mps);
        lines["agents.motorbike"] = lines.contains("agents.motorbike_normal_mps")
                                        ? lines["agents.motorbike_normal_mps"]
                                        : lines["agents.motorbike_slow_mps"];
        get_number(n, "service_radius_m", path, s.move.service_radius_m);
    }

    void econ(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "econ";
        check_keys(n, path, {"cost_per_meter", "fixed_cost_per_task"});
        if (n["cost_per_meter"])
            s.costs.cost_per_meter =
                per_mode(n["cost_per_meter"], "econ.cost_per_meter", s.costs.cost_per_meter);
        get_number(n, "fixed_cost_per_task", path, s.costs.fixed_cost_per_task);
    }

    void strategy(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "strategy";
        check_keys(n, path, {"kind", "p_transfer", "forced_margin", "review_period_s",
                             "collaborative_period_s", "neighborhood_radius_m"});
        std::string kind;
        if (get(n, "kind", path, kind)) {
            const auto k = sim::parse_strategy(kind);
            if (!k)
                throw ConfigError("strategy.kind",
                                  "expected not, random, forced, collaborative or att",
                                  lines["strategy.kind"]);
            s.strategy.kind = *k;
        }
        get_number(n, "p_transfer", path, s.strategy.p_transfer);
        get_number(n, "forced_margin", path, s.strategy.forced_margin);
        get_number(n, "review_period_s", path, s.strategy.review_period_s);
        get_number(n, "collaborative_period_s", path, s.strategy.collaborative_period_s);
        get_number(n, "neighborhood_radius_m", path, s.strategy.neighborhood_radius_m);
    }

    void tree_params(const YAML::Node& n, const std::string& path, learn::HoeffdingTreeParams& t) {
        get_number(n, "delta", path, t.delta);
        get(n, "grace_period", path, t.grace_period);
        get_number(n, "tie_threshold", path, t.tie_threshold);
        get(n, "n_split_points", path, t.n_split_points);
        get(n, "max_features", path, t.max_features);
        std::string leaf;
        if (get(n, "leaf_prediction", path, leaf)) {
            const auto lp = learn::parse_leaf_prediction(leaf);
            if (!lp)
                throw ConfigError(path + ".leaf_prediction",
                                  "expected majority or naive_bayes_adaptive",
                                  lines[path + ".leaf_prediction"]);
            t.leaf_prediction = *lp;
        }
    }

    void predictor(const YAML::Node& n, sim::Scenario& s) {
        const std::string path = "predictor";
        check_keys(n, path, {"model", "shared", "sample_period_s", "n_trees", "k", "window_size",
                             "delta", "grace_period", "tie_threshold", "n_split_points",
                             "max_features", "leaf_prediction", "member", "transfer_labels"});
        auto& m = s.predictor.model;
        std::string model;
        if (get(n, "model", path, model)) {
            const auto k = learn::parse_model_kind(model);
            if (!k)
                throw ConfigError("predictor.model", "expected hoeffding_tree, knn or forest",
                                  lines["predictor.model"]);
            m.kind = *k;
        }
        get(n, "shared", path, s.predictor.shared);
        get_number(n, "sample_period_s", path, s.predictor.sample_period_s);
        std::string tl;
        if (get(n, "transfer_labels", path, tl)) {
            if (tl == "withdraw")
                s.predictor.transfer_labels = sim::TransferLabels::Withdraw;
            else if (tl == "counterfactual")
                s.predictor.transfer_labels = sim::TransferLabels::Counterfactual;
            else
                throw ConfigError("predictor.transfer_labels", "expected withdraw or counterfactual",
                                  lines["predictor.transfer_labels"]);
        }
        get(n, "n_trees", path, m.n_trees);
        int k = m.knn.k;
        if (get(n, "k", path, k))
            m.knn.k = k;
        int window = static_cast<int>(m.knn.window_size);
        if (get(n, "window_size", path, window)) {
            if (window < 1)
                throw ConfigError("predictor.window_size", "must be positive",
                                  lines["predictor.window_size"]);
            m.knn.window_size = static_cast<std::size_t>(window);
        }
        tree_params(n, path, m.tree);
        if (const auto member = n["member"]) {
            const std::string mpath = path + ".member";
            check_keys(member, mpath, {"delta", "grace_period", "tie_threshold", "n_split_points",
                                       "max_features", "leaf_prediction"});
            tree_params(member, mpath, m.forest_tree);
        }
    }

    // Fields present in `n` override `s`; `top` allows the kind switch.
    void scenario(const YAML::Node& n, sim::Scenario& s, bool top) {
        check_keys(n, "", {"name", "kind", "seed", "duration_s", "dt_s", "area", "grid", "workers",
                           "tasks", "incidents", "agents", "econ", "strategy", "predictor",
                           "record_events"});
        if (const auto k = n["kind"]) {
            if (!top)
                throw ConfigError("kind", "variants cannot change the scenario kind", line_of(k));
            const auto kind = sim::parse_scenario_kind(k.as<std::string>(""));
            if (!kind)
                throw ConfigError("kind", "expected crowdshipping or crowdsensing", line_of(k));
            s = *kind == sim::ScenarioKind::Crowdshipping ? sim::default_crowdshipping()
                                                           : sim::default_crowdsensing(1);
        }
        get(n, "name", "", s.name);
        std::uint64_t seed = s.seed;
        if (get(n, "seed", "", seed))
            s.seed = seed;
        get_number(n, "duration_s", "", s.duration_s);
        get_number(n, "dt_s", "", s.dt_s);
        get(n, "record_events", "", s.record_events);
        if (n["area"])
            area(n["area"], s);
        if (n["grid"])
            grid(n["grid"], s);
        if (n["workers"])
            workers(n["workers"], s);
        if (n["tasks"])
            tasks(n["tasks"], s);
        if (n["incidents"])
            incidents(n["incidents"], s);
        if (n["agents"])
            agents(n["agents"], s);
        if (n["econ"])
            econ(n["econ"], s);
        if (n["strategy"])
            strategy(n["strategy"], s);
        if (n["predictor"])
            predictor(n["predictor"], s);
    }

    void validate(const sim::Scenario& s) {
        try {
            sim::validate(s);
        } catch (const ConfigError& e) {
            std::string field = e.field();
            int line = -1;
            if (const auto it = lines.find(field); it != lines.end())
                line = it->second;
            throw ConfigError(field, e.reason(), line);
        }
    }
};

} // namespace

const sim::Scenario& ConfigFile::find(const std::string& name) const {
    if (name == scenario.name)
        return scenario;
    for (const auto& [n, s] : variants)
        if (n == name)
            return s;
    throw ConfigError("variants", "no scenario named '" + name + "'");
}

ConfigFile parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.msg, e.mark.line >= 0 ? e.mark.line + 1 : -1);
    }
    if (!root || root.IsNull())
        throw ConfigError("", "empty configuration");
    Reader rd;
    rd.base_dir = base_dir;
    rd.check_keys(root, "", {"schema_version", "scenario", "variants", "output"});

    ConfigFile cfg;
    const auto version = root["schema_version"];
    if (!version)
        throw ConfigError("schema_version", "missing", 1);
    try {
        cfg.schema_version = version.as<int>();
    } catch (const YAML::Exception&) {
        throw ConfigError("schema_version", "wrong type", line_of(version));
    }
    if (cfg.schema_version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version", line_of(version));

    const auto sc = root["scenario"];
    if (!sc)
        throw ConfigError("scenario", "missing");
    if (!sc.IsMap())
        throw ConfigError("scenario", "expected a mapping", line_of(sc));
    if (!sc["kind"])
        throw ConfigError("scenario.kind", "missing", line_of(sc));
    rd.scenario(sc, cfg.scenario, true);
    rd.validate(cfg.scenario);

    if (const auto vs = root["variants"]) {
        if (!vs.IsMap())
            throw ConfigError("variants", "expected a mapping", line_of(vs));
        for (const auto& kv : vs) {
            const auto name = kv.first.as<std::string>();
            sim::Scenario s = cfg.scenario;
            s.name = name;
            if (!kv.second.IsNull())
                rd.scenario(kv.second, s, false);
            rd.validate(s);
            cfg.variants.emplace_back(name, std::move(s));
        }
    }

    if (const auto out = root["output"]) {
        rd.check_keys(out, "output", {"dir", "events", "stream_log"});
        std::string dir;
        if (rd.get(out, "dir", "output", dir))
            cfg.output.dir = rd.path_value(dir);
        rd.get(out, "events", "output", cfg.output.events);
        rd.get(out, "stream_log", "output", cfg.output.stream_log);
    }
    return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

} // namespace crowdswap::config
