#include "sketchgame/game.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sketchgame/errors.hpp"

namespace sketchgame {

GameSetting GameSetting::by_name(const std::string& name, int max_steps) {
    GameSetting s;
    s.name = name;
    s.max_steps = max_steps;
    if (name == "complete") {
        // defaults
    } else if (name == "max-step") {
        s.early_decision = false;
    } else if (name == "sender-fixed") {
        s.update_sender = false;
    } else if (name == "one-step") {
        s.max_steps = 1;
    } else if (name == "retrieve") {
        s.early_decision = false;
        s.update_sender = false;
        s.retrieve = true;
    } else if (name == "cumulative") {
        s.reinforce = true;
    } else {
        throw ConfigError("unknown game setting: " + name);
    }
    return s;
}

const std::vector<std::string>& GameSetting::known_names() {
    static const std::vector<std::string> names = {"complete", "max-step", "sender-fixed",
                                                   "one-step", "retrieve", "cumulative"};
    return names;
}

double EpisodeTrace::discounted_return(double gamma) const {
    return std::pow(gamma, static_cast<double>(t_choice)) * reward;
}

std::vector<double> realized_rewards(const EpisodeTrace& trace) {
    std::vector<double> r(static_cast<size_t>(trace.t_choice + 1), 0.0);
    r.back() = trace.reward;
    return r;
}

EpisodeTrace play_episode(Tape& tape, const SenderPolicy& sender, const ReceiverPolicy& receiver,
                          const ReferentSet& set, const RoundSample& round,
                          const GameSetting& setting, Rng& rng, bool train_mode) {
    const int M = static_cast<int>(round.context_refs.size());
    const int wait = M;
    const int T = setting.max_steps;
    const Referent& sref = set.referents[static_cast<size_t>(round.sender_ref)];
    const Tensor& target = sender_target_sketch(sref);

    EpisodeTrace trace;
    trace.round = round;
    trace.setting = setting.name;

    bool frozen_sender = !train_mode || !setting.update_sender;
    bool frozen_receiver = !train_mode;

    Var canvas = tape.constant(Tensor(target.shape));
    Var emb_prev = receiver.features().embed(tape, canvas, /*frozen=*/true);

    for (int t = 0; t < T; ++t) {
        StepRecord step;
        step.canvas_before = canvas;
        step.emb_before = emb_prev;
        step.emb_before_val = tape.value(emb_prev);

        step.mu = sender.mean(tape, target, canvas, frozen_sender);
        step.mu_val = tape.value(step.mu);
        if (step.mu_val.has_nan()) throw NumericalError("sender mean produced NaN");
        step.noise = train_mode && sender.exploration_c() > 0.0 ? SenderPolicy::draw_noise(rng)
                                                                : Tensor({30});
        if (train_mode) {
            step.action = sender.sample_action(tape, step.mu, step.noise, &step.action_unclamped);
        } else {
            step.action = step.mu;
            step.action_unclamped = step.mu_val;
        }
        step.action_val = tape.value(step.action);

        canvas = render_action(tape, canvas, step.action, set.config.raster);
        step.canvas_after = canvas;
        step.canvas_after_val = tape.value(canvas);
        step.emb_after = receiver.features().embed(tape, canvas, /*frozen=*/true);
        step.emb_after_val = tape.value(step.emb_after);

        // receiver options: wait masked at the horizon; image options masked
        // before the horizon when early decision is disabled
        bool last = (t == T - 1);
        if (last) {
            for (int j = 0; j < M; ++j) step.allowed.push_back(j);
        } else if (setting.early_decision) {
            for (int j = 0; j <= M; ++j) step.allowed.push_back(j);
        } else {
            step.allowed.push_back(wait);
        }

        Var logits = receiver.logits(tape, round.context_refs, step.emb_before, step.emb_after,
                                     frozen_receiver);
        step.probs = tape.masked_softmax(logits, step.allowed);
        step.probs_val = tape.value(step.probs);
        if (step.probs_val.has_nan()) throw NumericalError("receiver policy produced NaN");

        for (int j = 0; j < M; ++j) {
            int rc = set.referents[static_cast<size_t>(round.context_refs[static_cast<size_t>(j)])].class_id;
            step.option_rewards.push_back(rc == sref.class_id ? 1.0 : -1.0);
        }

        int act;
        if (train_mode) {
            double u = uniform(rng);
            double acc = 0.0;
            act = step.allowed.back();
            for (int j : step.allowed) {
                acc += step.probs_val[j];
                if (u < acc) {
                    act = j;
                    break;
                }
            }
        } else {
            act = step.allowed.front();
            for (int j : step.allowed)
                if (step.probs_val[j] > step.probs_val[act]) act = j;
        }
        step.receiver_action = act;
        emb_prev = step.emb_after;
        trace.steps.push_back(std::move(step));

        if (act != wait) {
            trace.t_choice = t;
            trace.reward = trace.steps.back().option_rewards[static_cast<size_t>(act)];
            trace.success = trace.reward > 0.0;
            break;
        }
    }
    if (trace.t_choice < 0) throw NumericalError("episode failed to terminate");  // unreachable
    return trace;
}

BatchStats run_eval_batch(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                          const ReferentSet& set, Split split, const GameSetting& setting, int M,
                          int episodes, std::uint64_t seed) {
    BatchStats stats;
    stats.episodes = episodes;
    for (int e = 0; e < episodes; ++e) {
        Rng rng = make_rng(seed, 0xeba7ULL, static_cast<std::uint64_t>(e));
        RoundSample round = set.sample_round(split, M, rng);
        Tape tape;
        EpisodeTrace tr = play_episode(tape, sender, receiver, set, round, setting, rng, false);
        stats.success_rate += tr.success ? 1.0 : 0.0;
        stats.avg_steps += tr.num_steps();
    }
    if (episodes > 0) {
        stats.success_rate /= episodes;
        stats.avg_steps /= episodes;
    }
    return stats;
}

void dump_traces(const std::string& path, const std::vector<EpisodeTrace>& traces, bool append) {
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw IoError("cannot open trace dump: " + path);
    for (const EpisodeTrace& tr : traces) {
        nlohmann::json j;
        j["setting"] = tr.setting;
        j["seed"] = tr.seed;
        j["t_choice"] = tr.t_choice;
        j["steps"] = tr.num_steps();
        j["reward"] = tr.reward;
        j["sender_ref"] = tr.round.sender_ref;
        j["context"] = tr.round.context_refs;
        j["target_index"] = tr.round.target_index;
        std::vector<int> actions;
        for (const StepRecord& s : tr.steps) actions.push_back(s.receiver_action);
        j["receiver_actions"] = actions;
        os << j.dump() << "\n";
    }
}

}  // namespace sketchgame
