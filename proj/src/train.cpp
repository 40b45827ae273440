#include "sketchgame/train.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "sketchgame/errors.hpp"

namespace sketchgame {

namespace fs = std::filesystem;
using nlohmann::json;

Agents make_agents(const RunConfig& cfg, int num_classes, std::uint64_t seed) {
    Agents a;
    a.dims.canvas = cfg.canvas;
    a.dims.feature_dim = cfg.feature_dim;
    a.dims.key_dim = cfg.key_dim;
    a.features = std::make_unique<FeatureNet>(a.dims, num_classes, hash_mix(seed, 0xfea7ULL));
    a.sender = std::make_unique<SenderPolicy>(a.dims, hash_mix(seed, 0x5e0dULL), cfg.exploration_c);
    a.receiver = std::make_unique<ReceiverPolicy>(a.features.get(), a.dims, hash_mix(seed, 0x4ec5ULL));
    a.value = std::make_unique<ValueNet>(a.dims, cfg.context_size, hash_mix(seed, 0x7a1eULL));
    return a;
}

void save_checkpoint(const std::string& path, const Agents& a, const std::string& setting,
                     std::uint64_t seed, int iteration) {
    TensorMap map;
    pack_parameter_set(a.features->params(), map);
    pack_parameter_set(a.sender->params(), map);
    pack_parameter_set(a.receiver->params(), map);
    pack_parameter_set(a.value->params(), map);
    json meta;
    meta["schema"] = 1;
    meta["setting"] = setting;
    meta["seed"] = seed;
    meta["iteration"] = iteration;
    meta["adam_sender"] = a.adam_sender.steps();
    meta["adam_receiver"] = a.adam_receiver.steps();
    meta["adam_value"] = a.adam_value.steps();
    save_tensor_map(path, meta.dump(), map);
}

int load_checkpoint(const std::string& path, Agents& a) {
    std::string meta_text;
    TensorMap map = load_tensor_map(path, &meta_text);
    json meta = json::parse(meta_text);
    unpack_parameter_set(a.features->params(), map);
    unpack_parameter_set(a.sender->params(), map);
    unpack_parameter_set(a.receiver->params(), map);
    unpack_parameter_set(a.value->params(), map);
    a.adam_sender.set_steps(meta.value("adam_sender", 0L));
    a.adam_receiver.set_steps(meta.value("adam_receiver", 0L));
    a.adam_value.set_steps(meta.value("adam_value", 0L));
    return meta.value("iteration", 0);
}

std::string checkpoint_meta(const std::string& path) {
    std::string meta_text;
    load_tensor_map(path, &meta_text);
    return meta_text;
}

// Fixed strip probe: communicate class `cls` with a deterministic context.
RoundSample probe_round(const ReferentSet& set, int cls, int M) {
    std::vector<int> own = set.class_refs(Split::Train, cls);
    std::vector<int> classes = set.split_classes(Split::Train);
    RoundSample r;
    r.sender_ref = own[0];
    r.target_index = cls % M;
    int di = 0;
    for (int j = 0; j < M; ++j) {
        if (j == r.target_index) {
            r.context_refs.push_back(own.size() > 1 ? own[1] : own[0]);
        } else {
            while (classes[static_cast<size_t>(di)] == cls) ++di;
            r.context_refs.push_back(set.class_refs(Split::Train, classes[static_cast<size_t>(di)])[0]);
            ++di;
        }
    }
    return r;
}

namespace {

void write_strip_svgs(const RunConfig& cfg, const GameSetting& setting, const Agents& a,
                      const ReferentSet& set, const std::string& dir, int iteration) {
    fs::create_directories(dir);
    for (int cls : set.split_classes(Split::Train)) {
        RoundSample round = probe_round(set, cls, cfg.context_size);
        std::vector<StrokeBundle> strokes =
            greedy_episode_strokes(*a.sender, *a.receiver, set, round, setting);
        char name[64];
        std::snprintf(name, sizeof(name), "iter_%06d_class_%d.svg", iteration, cls);
        write_svg(dir + "/" + name, strokes, set.config.raster);
    }
}

struct RolloutSlot {
    std::unique_ptr<Tape> tape;
    EpisodeTrace trace;
    bool failed = false;
    std::string error;
};

}  // namespace

std::vector<StrokeBundle> greedy_episode_strokes(const SenderPolicy& sender,
                                                 const ReceiverPolicy& receiver,
                                                 const ReferentSet& set, const RoundSample& round,
                                                 const GameSetting& setting) {
    Tape tape;
    Rng rng = make_rng(0);
    EpisodeTrace tr = play_episode(tape, sender, receiver, set, round, setting, rng, false);
    std::vector<StrokeBundle> out;
    for (const StepRecord& s : tr.steps) out.push_back(bundle_from_flat(s.action_val.data.data()));
    return out;
}

TrainResult train_run(const RunConfig& cfg, const GameSetting& setting, std::uint64_t seed,
                      const ReferentSet& set, Agents& agents, const std::string& run_dir,
                      int resume_from) {
    fs::create_directories(run_dir);
    TrainSchedule sched;
    sched.lr = cfg.lr;
    sched.warmup_iters = setting.update_sender ? cfg.warmup_iters : 0;
    sched.decay_interval = cfg.decay_interval;
    sched.decay_base = cfg.decay_base;
    sched.iterations = cfg.iterations;
    sched.batch = cfg.batch;

    ReturnConfig rcfg{cfg.gamma, cfg.lambda};
    const int M = cfg.context_size;
    std::uint64_t train_stream = hash_mix(seed, 0x7e41ULL);
    std::uint64_t val_stream = hash_mix(seed, 0x7a11ULL);

    if (!setting.update_sender) agents.sender->set_exploration_c(0.0);
    agents.receiver->refresh_reference_embeddings(set);

    bool append = resume_from > 0;
    std::ofstream train_log(run_dir + "/train_log.csv", append ? std::ios::app : std::ios::trunc);
    std::ofstream val_log(run_dir + "/val_log.csv", append ? std::ios::app : std::ios::trunc);
    if (!train_log || !val_log) throw IoError("cannot open training logs in " + run_dir);
    if (!append) {
        train_log << "iteration,setting,seed,success_rate,avg_steps,objective,value_loss,"
                     "lr_sender,lr_receiver\n";
        val_log << "iteration,success_rate,avg_steps,acc1,acc3\n";
    }

    GameSetting forced1 = setting, forced3 = setting;
    forced1.early_decision = false;
    forced1.max_steps = 1;
    forced3.early_decision = false;
    forced3.max_steps = std::min(3, cfg.max_steps);

    TrainResult result;
    auto validate = [&](int iteration) {
        int episodes = cfg.val_batches * cfg.batch;
        BatchStats v = run_eval_batch(*agents.sender, *agents.receiver, set, Split::Train, setting,
                                      M, episodes, hash_mix(val_stream, static_cast<std::uint64_t>(iteration)));
        int probe_eps = std::max(30, episodes / 4);
        BatchStats a1 = run_eval_batch(*agents.sender, *agents.receiver, set, Split::Train, forced1,
                                       M, probe_eps, hash_mix(val_stream, 0xacc1ULL + static_cast<std::uint64_t>(iteration)));
        BatchStats a3 = run_eval_batch(*agents.sender, *agents.receiver, set, Split::Train, forced3,
                                       M, probe_eps, hash_mix(val_stream, 0xacc3ULL + static_cast<std::uint64_t>(iteration)));
        ValPoint p{iteration, v.success_rate, v.avg_steps, a1.success_rate, a3.success_rate};
        result.validation.push_back(p);
        val_log << p.iteration << ',' << p.success << ',' << p.avg_steps << ',' << p.acc1 << ','
                << p.acc3 << '\n';
        val_log.flush();
    };

    std::vector<EpisodeTrace> batch_traces;
    std::vector<ReturnTrace> batch_returns;

    for (int iter = resume_from; iter < cfg.iterations; ++iter) {
        double lr_s = sched.sender_lr(iter + 1);
        double lr_r = sched.receiver_lr(iter + 1);
        agents.sender->params().zero_grad();
        agents.receiver->params().zero_grad();

        batch_traces.clear();
        batch_returns.clear();
        double objective_sum = 0.0;
        double success_sum = 0.0, steps_sum = 0.0;

        try {
            int e = 0;
            while (e < cfg.batch) {
                int chunk = std::min(cfg.workers, cfg.batch - e);
                std::vector<RolloutSlot> slots(static_cast<size_t>(chunk));
                auto roll = [&](int k) {
                    RolloutSlot& slot = slots[static_cast<size_t>(k)];
                    try {
                        slot.tape = std::make_unique<Tape>();
                        Rng rng = make_rng(train_stream, static_cast<std::uint64_t>(iter),
                                           static_cast<std::uint64_t>(e + k));
                        RoundSample round = set.sample_round(Split::Train, M, rng);
                        slot.trace = play_episode(*slot.tape, *agents.sender, *agents.receiver, set,
                                                  round, setting, rng, true);
                        slot.trace.seed = hash_mix(train_stream, static_cast<std::uint64_t>(iter));
                        slot.trace.setting = setting.name;
                    } catch (const std::exception& ex) {
                        slot.failed = true;
                        slot.error = ex.what();
                    }
                };
                if (chunk == 1) {
                    roll(0);
                } else {
                    std::vector<std::thread> pool;
                    for (int k = 0; k < chunk; ++k) pool.emplace_back(roll, k);
                    for (std::thread& t : pool) t.join();
                }
                for (int k = 0; k < chunk; ++k) {
                    RolloutSlot& slot = slots[static_cast<size_t>(k)];
                    if (slot.failed) throw NumericalError("rollout failed: " + slot.error);
                    Tape& tape = *slot.tape;
                    ReturnTrace rt = build_return_trace(slot.trace, *agents.receiver, *agents.value);
                    Var obj;
                    if (setting.reinforce) {
                        obj = episode_reinforce_objective(tape, slot.trace, rcfg,
                                                          agents.sender->exploration_c());
                    } else {
                        obj = episode_surrogate(tape, slot.trace, rt, agents.receiver.get(),
                                                agents.value.get(), rcfg, cfg.vlambda_flow);
                    }
                    double ov = tape.scalar(obj);
                    if (std::isnan(ov)) throw NumericalError("objective is NaN");
                    objective_sum += ov;
                    tape.backward(tape.scale(obj, -1.0));  // ascent via descent on -objective
                    success_sum += slot.trace.success ? 1.0 : 0.0;
                    steps_sum += slot.trace.num_steps();
                    batch_traces.push_back(std::move(slot.trace));
                    batch_returns.push_back(std::move(rt));
                    slot.tape.reset();
                }
                e += chunk;
            }

            agents.sender->params().scale_grad(1.0 / cfg.batch);
            agents.receiver->params().scale_grad(1.0 / cfg.batch);
            if (setting.update_sender)
                agents.adam_sender.step(agents.sender->params(), lr_s);
            agents.adam_receiver.step(agents.receiver->params(), lr_r);

            double value_loss = 0.0;
            if (!setting.reinforce)
                value_loss = update_value(batch_traces, batch_returns, *agents.receiver,
                                          *agents.value, agents.adam_value, lr_r, rcfg);

            train_log << (iter + 1) << ',' << setting.name << ',' << seed << ','
                      << success_sum / cfg.batch << ',' << steps_sum / cfg.batch << ','
                      << objective_sum / cfg.batch << ',' << value_loss << ',' << lr_s << ','
                      << lr_r << '\n';
        } catch (const NumericalError&) {
            if (!batch_traces.empty())
                dump_traces(run_dir + "/abort_traces.jsonl", batch_traces, false);
            throw;
        }

        int done = iter + 1;
        if (done % cfg.validate_every == 0 || done == cfg.iterations) validate(done);
        if (done % cfg.strip_every == 0 || done == cfg.iterations)
            write_strip_svgs(cfg, setting, agents, set, run_dir + "/strips", done);
        if (done % cfg.checkpoint_every == 0 || done == cfg.iterations) {
            char name[128];
            std::snprintf(name, sizeof(name), "%s_%llu_%d.ckpt", setting.name.c_str(),
                          static_cast<unsigned long long>(seed), done);
            std::string path = run_dir + "/" + name;
            save_checkpoint(path, agents, setting.name, seed, done);
            result.final_checkpoint = path;
        }
    }
    result.iterations = cfg.iterations;
    return result;
}

}  // namespace sketchgame
