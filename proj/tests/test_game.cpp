#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sketchgame/errors.hpp"
#include "sketchgame/game.hpp"

using namespace sketchgame;

namespace {

struct Fixture {
    ReferentSet set;
    AgentDims dims;
    SenderPolicy sender;
    FeatureNet features;
    ReceiverPolicy receiver;

    static ReferentConfig config() {
        ReferentConfig cfg;
        cfg.train_classes = 4;
        cfg.unseen_classes = 0;
        cfg.train_instances = 3;
        cfg.heldout_instances = 1;
        cfg.raster.width = 32;
        cfg.raster.height = 32;
        return cfg;
    }
    static AgentDims mkdims() {
        AgentDims d;
        d.canvas = 32;
        d.feature_dim = 32;
        d.key_dim = 16;
        return d;
    }

    Fixture()
        : set(build_referent_set(config())),
          dims(mkdims()),
          sender(dims, 5, 0.0025),
          features(dims, 4, 7),
          receiver(&features, dims, 11) {
        receiver.refresh_reference_embeddings(set);
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("setting table matches the controlled experiments") {
    GameSetting c = GameSetting::by_name("complete");
    CHECK(c.early_decision);
    CHECK(c.update_sender);
    CHECK(c.max_steps == 7);
    GameSetting ms = GameSetting::by_name("max-step");
    CHECK_FALSE(ms.early_decision);
    CHECK(ms.update_sender);
    GameSetting sf = GameSetting::by_name("sender-fixed");
    CHECK_FALSE(sf.update_sender);
    GameSetting os = GameSetting::by_name("one-step");
    CHECK(os.max_steps == 1);
    GameSetting rt = GameSetting::by_name("retrieve");
    CHECK_FALSE(rt.early_decision);
    CHECK_FALSE(rt.update_sender);
    GameSetting cu = GameSetting::by_name("cumulative");
    CHECK(cu.reinforce);
    CHECK_THROWS_AS(GameSetting::by_name("nonsense"), ConfigError);
    CHECK(GameSetting::known_names().size() == 6);
}

TEST_CASE("one-step episodes always decide at the first step") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("one-step");
    Rng rng = make_rng(31);
    for (int i = 0; i < 5; ++i) {
        RoundSample round = f.set.sample_round(Split::Train, 3, rng);
        Tape tape;
        EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, false);
        CHECK(tr.t_choice == 0);
        CHECK(tr.num_steps() == 1);
        CHECK(std::abs(tr.reward) == 1.0);
        CHECK(tr.steps[0].allowed == std::vector<int>{0, 1, 2});  // wait masked at horizon
    }
}

TEST_CASE("disabling early decision forces waits until the horizon") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("max-step", 4);
    Rng rng = make_rng(33);
    RoundSample round = f.set.sample_round(Split::Train, 3, rng);
    Tape tape;
    EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, false);
    CHECK(tr.t_choice == 3);
    REQUIRE(tr.steps.size() == 4);
    for (int t = 0; t < 3; ++t) {
        CHECK(tr.steps[static_cast<size_t>(t)].allowed == std::vector<int>{3});  // wait only
        CHECK(tr.steps[static_cast<size_t>(t)].receiver_action == 3);
    }
    CHECK(tr.steps[3].allowed == std::vector<int>{0, 1, 2});
}

TEST_CASE("complete setting offers all options before the horizon") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("complete", 3);
    Rng rng = make_rng(35);
    RoundSample round = f.set.sample_round(Split::Train, 3, rng);
    Tape tape;
    EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, false);
    for (int t = 0; t < tr.t_choice; ++t)
        CHECK(tr.steps[static_cast<size_t>(t)].allowed == std::vector<int>{0, 1, 2, 3});
    CHECK(tr.t_choice >= 0);
    CHECK(tr.t_choice <= 2);
}

TEST_CASE("canvas ink never decreases within an episode") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("max-step", 3);
    Rng rng = make_rng(37);
    RoundSample round = f.set.sample_round(Split::Train, 3, rng);
    Tape tape;
    EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, true);
    const Tensor* prev = nullptr;
    for (const StepRecord& s : tr.steps) {
        if (prev)
            for (int i = 0; i < prev->size(); ++i)
                CHECK(s.canvas_after_val.data[static_cast<size_t>(i)] >=
                      prev->data[static_cast<size_t>(i)] - 1e-12);
        prev = &s.canvas_after_val;
    }
}

TEST_CASE("option rewards mark exactly the target class positive") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("one-step");
    Rng rng = make_rng(39);
    RoundSample round = f.set.sample_round(Split::Train, 3, rng);
    Tape tape;
    EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, false);
    const std::vector<double>& r = tr.steps[0].option_rewards;
    for (int j = 0; j < 3; ++j)
        CHECK(r[static_cast<size_t>(j)] == (j == round.target_index ? 1.0 : -1.0));
}

TEST_CASE("realized rewards and discounted return agree") {
    EpisodeTrace tr;
    tr.t_choice = 2;
    tr.reward = 1.0;
    std::vector<double> r = realized_rewards(tr);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 1.0);
    CHECK(tr.discounted_return(0.85) == doctest::Approx(0.7225));
}

TEST_CASE("evaluation batches are deterministic in the seed") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("one-step");
    BatchStats a = run_eval_batch(f.sender, f.receiver, f.set, Split::Train, setting, 3, 40, 555);
    BatchStats b = run_eval_batch(f.sender, f.receiver, f.set, Split::Train, setting, 3, 40, 555);
    CHECK(a.success_rate == b.success_rate);
    CHECK(a.avg_steps == b.avg_steps);
    CHECK(a.avg_steps == 1.0);
}

TEST_CASE("untrained agents perform at chance") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("one-step");
    BatchStats st = run_eval_batch(f.sender, f.receiver, f.set, Split::Train, setting, 3, 300, 777);
    CHECK(st.success_rate > 1.0 / 3.0 - 0.12);
    CHECK(st.success_rate < 1.0 / 3.0 + 0.12);
}

TEST_CASE("trace dumps are valid json lines") {
    Fixture& f = fx();
    GameSetting setting = GameSetting::by_name("one-step");
    Rng rng = make_rng(41);
    RoundSample round = f.set.sample_round(Split::Train, 3, rng);
    Tape tape;
    EpisodeTrace tr = play_episode(tape, f.sender, f.receiver, f.set, round, setting, rng, false);
    dump_traces("/tmp/sg_test_traces.jsonl", {tr}, false);
    std::ifstream is("/tmp/sg_test_traces.jsonl");
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line.find("\"t_choice\":0") != std::string::npos);
}
