#pragma once

#include <string>
#include <vector>

#include "sketchgame/agents.hpp"
#include "sketchgame/referents.hpp"

namespace sketchgame {

// One row of the controlled-settings table.
struct GameSetting {
    std::string name = "complete";
    bool early_decision = true;
    bool update_sender = true;
    int max_steps = 7;
    bool retrieve = false;
    bool reinforce = false;  // REINFORCE ablation learner

    static GameSetting by_name(const std::string& name, int max_steps = 7);
    static const std::vector<std::string>& known_names();
};

struct StepRecord {
    // tape handles (valid for the episode's tape)
    Var canvas_before, canvas_after;
    Var emb_before, emb_after;
    Var mu, action, probs;
    // numeric copies
    Tensor canvas_after_val;
    Tensor emb_before_val, emb_after_val;
    Tensor probs_val;
    Tensor noise;               // standard-normal draw behind the action
    Tensor action_val;          // clamped action actually rendered
    Tensor action_unclamped;    // mu + sqrt(c)*noise, for the REINFORCE density
    Tensor mu_val;
    std::vector<int> allowed;   // receiver options available this step
    std::vector<double> option_rewards;  // r^j for the M images (+1 / -1)
    int receiver_action = -1;   // 0..M-1 image, M = wait
};

struct EpisodeTrace {
    RoundSample round;
    std::vector<StepRecord> steps;
    int t_choice = -1;          // zero-based step index of the choice
    double reward = 0.0;        // +1 / -1, undiscounted
    bool success = false;
    std::uint64_t seed = 0;
    std::string setting;

    int num_steps() const { return t_choice + 1; }  // reported "avg step" unit
    double discounted_return(double gamma) const;
};

// Realized per-step rewards r_0..r_{t_choice} (0 at waits, +-1 at the choice).
std::vector<double> realized_rewards(const EpisodeTrace& trace);

/// Plays one round on the given tape. In train mode the sender explores
/// (c > 0), the receiver samples, and the graph is kept differentiable; in
/// test mode c = 0 and the receiver acts greedily.
EpisodeTrace play_episode(Tape& tape, const SenderPolicy& sender, const ReceiverPolicy& receiver,
                          const ReferentSet& set, const RoundSample& round,
                          const GameSetting& setting, Rng& rng, bool train_mode);

struct BatchStats {
    double success_rate = 0.0;
    double avg_steps = 0.0;
    int episodes = 0;
};

// Independent test-mode episodes with per-episode rng streams.
BatchStats run_eval_batch(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                          const ReferentSet& set, Split split, const GameSetting& setting, int M,
                          int episodes, std::uint64_t seed);

// JSON-lines trace dump, one episode per line.
void dump_traces(const std::string& path, const std::vector<EpisodeTrace>& traces, bool append);

}  // namespace sketchgame
