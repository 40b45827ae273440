#include "sketchgame/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sketchgame/errors.hpp"
#include "sketchgame/game.hpp"

namespace sketchgame {

using nlohmann::json;

ReferentConfig RunConfig::referent_config() const {
    ReferentConfig rc;
    rc.train_classes = train_classes;
    rc.unseen_classes = unseen_classes;
    rc.train_instances = train_instances;
    rc.heldout_instances = heldout_instances;
    rc.seed = dataset_seed;
    rc.raster.width = canvas;
    rc.raster.height = canvas;
    return rc;
}

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

template <typename T>
void take(const json& j, std::set<std::string>& seen, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    seen.insert(key);
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check(j.is_object(), "config root must be a JSON object");

    RunConfig c;
    std::set<std::string> seen;
    take(j, seen, "schema_version", c.schema_version);
    check(c.schema_version == 1, "unsupported schema_version");

    take(j, seen, "train_classes", c.train_classes);
    take(j, seen, "unseen_classes", c.unseen_classes);
    take(j, seen, "train_instances", c.train_instances);
    take(j, seen, "heldout_instances", c.heldout_instances);
    take(j, seen, "dataset_seed", c.dataset_seed);

    take(j, seen, "context_size", c.context_size);
    take(j, seen, "max_steps", c.max_steps);
    take(j, seen, "gamma", c.gamma);

    take(j, seen, "exploration_c", c.exploration_c);
    take(j, seen, "feature_dim", c.feature_dim);
    take(j, seen, "key_dim", c.key_dim);
    take(j, seen, "canvas", c.canvas);

    take(j, seen, "lambda", c.lambda);
    take(j, seen, "lr", c.lr);
    take(j, seen, "warmup_iters", c.warmup_iters);
    take(j, seen, "decay_interval", c.decay_interval);
    take(j, seen, "decay_base", c.decay_base);
    take(j, seen, "iterations", c.iterations);
    take(j, seen, "batch", c.batch);
    take(j, seen, "vlambda_flow", c.vlambda_flow);

    take(j, seen, "setting", c.setting);
    take(j, seen, "seeds", c.seeds);
    take(j, seen, "out_dir", c.out_dir);
    take(j, seen, "validate_every", c.validate_every);
    take(j, seen, "val_batches", c.val_batches);
    take(j, seen, "checkpoint_every", c.checkpoint_every);
    take(j, seen, "strip_every", c.strip_every);
    take(j, seen, "workers", c.workers);

    for (auto it = j.begin(); it != j.end(); ++it)
        if (!seen.count(it.key())) throw ConfigError("unknown config key: " + it.key());

    check(c.train_classes >= 4 && c.train_classes <= 10, "train_classes must be in [4,10]");
    check(c.unseen_classes >= 0 && c.unseen_classes <= 4, "unseen_classes must be in [0,4]");
    check(c.train_instances >= 2, "train_instances must be >= 2");
    check(c.heldout_instances >= 1, "heldout_instances must be >= 1");
    check(c.context_size >= 1 && c.context_size < c.train_classes,
          "context_size must be in [1, train_classes)");
    check(c.max_steps >= 1, "max_steps must be >= 1");
    check(c.gamma > 0.0 && c.gamma <= 1.0, "gamma must be in (0,1]");
    check(c.exploration_c >= 0.0, "exploration_c must be >= 0");
    check(c.feature_dim > 0 && c.key_dim > 0, "embedding dims must be positive");
    check(c.canvas >= 16, "canvas must be >= 16");
    check(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda must be in [0,1]");
    check(c.lr > 0.0, "lr must be positive");
    check(c.warmup_iters >= 0 && c.decay_interval >= 1, "bad schedule parameters");
    check(c.decay_base > 0.0 && c.decay_base <= 1.0, "decay_base must be in (0,1]");
    check(c.iterations >= 1 && c.batch >= 1, "iterations and batch must be >= 1");
    bool known = false;
    for (const std::string& n : GameSetting::known_names())
        if (n == c.setting) known = true;
    check(known, "unknown setting: " + c.setting);
    check(!c.seeds.empty(), "seeds must be nonempty");
    check(c.validate_every >= 1 && c.val_batches >= 1, "bad validation parameters");
    check(c.checkpoint_every >= 1 && c.strip_every >= 1, "bad checkpoint/strip intervals");
    check(c.workers >= 1, "workers must be >= 1");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_json(const RunConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["train_classes"] = c.train_classes;
    j["unseen_classes"] = c.unseen_classes;
    j["train_instances"] = c.train_instances;
    j["heldout_instances"] = c.heldout_instances;
    j["dataset_seed"] = c.dataset_seed;
    j["context_size"] = c.context_size;
    j["max_steps"] = c.max_steps;
    j["gamma"] = c.gamma;
    j["exploration_c"] = c.exploration_c;
    j["feature_dim"] = c.feature_dim;
    j["key_dim"] = c.key_dim;
    j["canvas"] = c.canvas;
    j["lambda"] = c.lambda;
    j["lr"] = c.lr;
    j["warmup_iters"] = c.warmup_iters;
    j["decay_interval"] = c.decay_interval;
    j["decay_base"] = c.decay_base;
    j["iterations"] = c.iterations;
    j["batch"] = c.batch;
    j["vlambda_flow"] = c.vlambda_flow;
    j["setting"] = c.setting;
    j["seeds"] = c.seeds;
    j["out_dir"] = c.out_dir;
    j["validate_every"] = c.validate_every;
    j["val_batches"] = c.val_batches;
    j["checkpoint_every"] = c.checkpoint_every;
    j["strip_every"] = c.strip_every;
    j["workers"] = c.workers;
    return j.dump(2);
}

void echo_run_config(const RunConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir + "/config.json");
    if (!os) throw IoError("cannot write resolved config into " + dir);
    os << run_config_json(cfg) << "\n";
}

}  // namespace sketchgame
