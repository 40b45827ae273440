#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchgame/referents.hpp"

namespace sketchgame {

/// Flat run configuration; loads from flat JSON with a schema version.
/// Unknown keys are rejected, ranges validated, and the resolved config is
/// echoed into the output directory.
struct RunConfig {
    int schema_version = 1;

    // dataset
    int train_classes = 10;
    int unseen_classes = 4;
    int train_instances = 20;
    int heldout_instances = 10;
    std::uint64_t dataset_seed = 1;

    // game
    int context_size = 3;    // M
    int max_steps = 7;       // T
    double gamma = 0.85;

    // agents
    double exploration_c = 0.0025;
    int feature_dim = 128;
    int key_dim = 64;
    int canvas = 64;

    // learn
    double lambda = 0.9;
    double lr = 1e-4;
    int warmup_iters = 2000;
    int decay_interval = 1000;
    double decay_base = 0.99;
    int iterations = 3000;
    int batch = 16;
    bool vlambda_flow = false;

    // run orchestration
    std::string setting = "complete";
    std::vector<int> seeds = {0, 1, 2};
    std::string out_dir = "out";
    int validate_every = 50;
    int val_batches = 10;
    int checkpoint_every = 500;
    int strip_every = 250;
    int workers = 1;

    ReferentConfig referent_config() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& cfg);
void echo_run_config(const RunConfig& cfg, const std::string& dir);

}  // namespace sketchgame
