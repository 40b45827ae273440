#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sketchgame/config.hpp"
#include "sketchgame/game.hpp"
#include "sketchgame/learn.hpp"

namespace sketchgame {

// The four networks of one sender/receiver pair plus their optimizers.
struct Agents {
    AgentDims dims;
    std::unique_ptr<FeatureNet> features;
    std::unique_ptr<SenderPolicy> sender;
    std::unique_ptr<ReceiverPolicy> receiver;
    std::unique_ptr<ValueNet> value;
    Adam adam_sender, adam_receiver, adam_value;
};

Agents make_agents(const RunConfig& cfg, int num_classes, std::uint64_t seed);

void save_checkpoint(const std::string& path, const Agents& a, const std::string& setting,
                     std::uint64_t seed, int iteration);
// Restores parameters and optimizer state in place; returns the stored iteration.
int load_checkpoint(const std::string& path, Agents& a);
std::string checkpoint_meta(const std::string& path);

struct ValPoint {
    int iteration = 0;
    double success = 0.0;
    double avg_steps = 0.0;
    double acc1 = 0.0;  // forced 1-step accuracy
    double acc3 = 0.0;  // forced 3-step accuracy
};

struct TrainResult {
    std::string final_checkpoint;
    std::vector<ValPoint> validation;
    int iterations = 0;
};

/// The full training loop for one (setting, seed) run: batched on-policy
/// rollouts, surrogate or REINFORCE updates, value regression, warm-up and
/// decay schedules, periodic validation, checkpoints, and evolution strips.
/// Logs go to run_dir/train_log.csv and run_dir/val_log.csv; checkpoints to
/// run_dir/<setting>_<seed>_<iter>.ckpt. resume_from > 0 restarts from that
/// checkpoint and appends to the logs.
TrainResult train_run(const RunConfig& cfg, const GameSetting& setting, std::uint64_t seed,
                      const ReferentSet& set, Agents& agents, const std::string& run_dir,
                      int resume_from = 0);

// Deterministic round used for strip probes: class `cls` as target with a
// fixed context.
RoundSample probe_round(const ReferentSet& set, int cls, int M);

// Greedy rollout for a fixed target; returns the actions drawn up to the
// receiver's choice (or the horizon).
std::vector<StrokeBundle> greedy_episode_strokes(const SenderPolicy& sender,
                                                 const ReceiverPolicy& receiver,
                                                 const ReferentSet& set, const RoundSample& round,
                                                 const GameSetting& setting);

}  // namespace sketchgame
