#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchgame/errors.hpp"
#include "sketchgame/learn.hpp"

using namespace sketchgame;

namespace {

// Independent direct-summation oracles, written from the return definitions.
double oracle_vnk(const ReturnTrace& tr, int t, int k, double gamma) {
    int h = std::min(t + k, tr.t_choice);
    double out = 0;
    for (int n = t; n < h; ++n) out += std::pow(gamma, n - t) * tr.rewards[static_cast<size_t>(n)];
    if (h == tr.t_choice)
        out += std::pow(gamma, h - t) * tr.rewards[static_cast<size_t>(h)];
    else
        out += std::pow(gamma, h - t) * tr.values[static_cast<size_t>(h)];
    return out;
}

double oracle_lambda(const ReturnTrace& tr, int t, double gamma, double lambda) {
    if (t > tr.t_choice) return tr.values[static_cast<size_t>(t)];
    int H = tr.t_choice - t + 1;
    double out = 0;
    for (int n = 1; n <= H - 1; ++n)
        out += (1.0 - lambda) * std::pow(lambda, n - 1) * oracle_vnk(tr, t, n, gamma);
    out += std::pow(lambda, H - 1) * oracle_vnk(tr, t, H, gamma);
    return out;
}

ReturnTrace random_trace(Rng& rng) {
    ReturnTrace tr;
    tr.t_choice = uniform_int(rng, 7);
    tr.rewards.assign(static_cast<size_t>(tr.t_choice) + 1, 0.0);
    tr.rewards.back() = uniform(rng) < 0.5 ? 1.0 : -1.0;
    tr.values.resize(static_cast<size_t>(tr.t_choice) + 2);
    for (double& v : tr.values) v = 2.0 * uniform(rng) - 1.0;
    return tr;
}

// Minimal synthetic step: probability leaf plus fixed option rewards.
StepRecord synthetic_step(Tape& tape, const std::vector<double>& probs,
                          const std::vector<double>& rewards, bool wait_allowed, int action) {
    StepRecord s;
    Tensor p({static_cast<int>(probs.size())});
    p.data = probs;
    s.probs = tape.leaf(p);
    s.probs_val = p;
    s.option_rewards = rewards;
    int M = static_cast<int>(rewards.size());
    for (int j = 0; j < M; ++j) s.allowed.push_back(j);
    if (wait_allowed) s.allowed.push_back(M);
    s.receiver_action = action;
    return s;
}

}  // namespace

TEST_CASE("bootstrapped return hand examples") {
    ReturnTrace tr;
    tr.t_choice = 2;
    tr.rewards = {0.0, 0.0, 1.0};
    tr.values = {0.0, 0.4, 0.0, 0.0};
    ReturnConfig cfg{0.85, 0.9};
    // k past the horizon: pure discounted Monte Carlo
    CHECK(mc_bootstrap_value(tr, 0, 10, cfg) == doctest::Approx(0.7225).epsilon(1e-12));
    // one-step bootstrap at a wait step
    CHECK(mc_bootstrap_value(tr, 0, 1, cfg) == doctest::Approx(0.34).epsilon(1e-12));
    CHECK_THROWS_AS(mc_bootstrap_value(tr, 3, 1, cfg), NumericalError);
    CHECK_THROWS_AS(mc_bootstrap_value(tr, 0, 0, cfg), NumericalError);
}

TEST_CASE("lambda return matches the direct oracle on random episodes") {
    Rng rng = make_rng(2024);
    const double mixes[6] = {0.0, 0.5, 0.85, 0.9, 0.95, 1.0};
    for (int trial = 0; trial < 1000; ++trial) {
        ReturnTrace tr = random_trace(rng);
        double gamma = mixes[trial % 6] == 0.0 ? 0.85 : mixes[trial % 6];
        double lambda = mixes[(trial / 6) % 6];
        ReturnConfig cfg{gamma, lambda};
        for (int t = 0; t <= tr.t_choice + 1; ++t) {
            double got = lambda_value(tr, t, cfg);
            double want = oracle_lambda(tr, t, gamma, lambda);
            CHECK(std::abs(got - want) <= 1e-12);
        }
        for (int t = 0; t <= tr.t_choice; ++t)
            for (int k = 1; k <= 8; ++k)
                CHECK(std::abs(mc_bootstrap_value(tr, t, k, cfg) - oracle_vnk(tr, t, k, gamma)) <= 1e-12);
    }
}

TEST_CASE("endpoint collapses are exact") {
    Rng rng = make_rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        ReturnTrace tr = random_trace(rng);
        ReturnConfig mc{0.85, 1.0};
        ReturnConfig one{0.85, 0.0};
        for (int t = 0; t <= tr.t_choice; ++t) {
            int H = tr.t_choice - t + 1;
            CHECK(lambda_value(tr, t, mc) == mc_bootstrap_value(tr, t, H, mc));
            CHECK(lambda_value(tr, t, one) == mc_bootstrap_value(tr, t, 1, one));
        }
    }
}

TEST_CASE("reinforce coefficients match a cumulative-sum oracle") {
    Rng rng = make_rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + uniform_int(rng, 7);
        std::vector<double> r(static_cast<size_t>(n));
        for (double& v : r) v = 2.0 * uniform(rng) - 1.0;
        double gamma = 0.85;
        std::vector<double> g = reinforce_coefficients(r, gamma);
        for (int t = 0; t < n; ++t) {
            double want = 0;
            for (int m = t; m < n; ++m) want += std::pow(gamma, m - t) * r[static_cast<size_t>(m)];
            CHECK(std::abs(g[static_cast<size_t>(t)] - want) <= 1e-12);
        }
    }
}

TEST_CASE("surrogate hand example with a wait option") {
    Tape tape;
    EpisodeTrace trace;
    trace.t_choice = 0;
    trace.reward = 1.0;
    trace.steps.push_back(synthetic_step(tape, {0.6, 0.4}, {1.0}, true, 0));
    ReturnTrace rt;
    rt.t_choice = 0;
    rt.rewards = {1.0};
    rt.values = {0.0, 0.5};
    ReturnConfig cfg{0.85, 0.9};
    const ReceiverPolicy* no_receiver = nullptr;
    const ValueNet* no_value = nullptr;
    Var v = episode_surrogate(tape, trace, rt, no_receiver, no_value, cfg, false);
    CHECK(tape.scalar(v) == doctest::Approx(0.77).epsilon(1e-12));
}

TEST_CASE("certain correct receiver pins the surrogate at one") {
    Tape tape;
    EpisodeTrace trace;
    trace.t_choice = 0;
    trace.reward = 1.0;
    trace.steps.push_back(synthetic_step(tape, {1.0, 0.0, 0.0, 0.0}, {1.0, -1.0, -1.0}, true, 0));
    ReturnTrace rt;
    rt.t_choice = 0;
    rt.rewards = {1.0};
    rt.values = {0.0, 0.9};
    ReturnConfig cfg{0.85, 0.9};
    const ReceiverPolicy* no_receiver = nullptr;
    const ValueNet* no_value = nullptr;
    Var v = episode_surrogate(tape, trace, rt, no_receiver, no_value, cfg, false);
    CHECK(tape.scalar(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("surrogate stays inside the unit interval for stochastic steps") {
    Rng rng = make_rng(91);
    for (int trial = 0; trial < 200; ++trial) {
        Tape tape;
        EpisodeTrace trace;
        trace.t_choice = 0;
        std::vector<double> p(4);
        double s = 0;
        for (double& v : p) {
            v = uniform(rng);
            s += v;
        }
        for (double& v : p) v /= s;
        trace.steps.push_back(synthetic_step(tape, p, {1.0, -1.0, -1.0}, true, 0));
        ReturnTrace rt;
        rt.t_choice = 0;
        rt.rewards = {1.0};
        rt.values = {0.0, 2.0 * uniform(rng) - 1.0};  // clipped-value range
        ReturnConfig cfg{0.85, 0.9};
        const ReceiverPolicy* no_receiver = nullptr;
        const ValueNet* no_value = nullptr;
        double v = tape.scalar(episode_surrogate(tape, trace, rt, no_receiver, no_value, cfg, false));
        CHECK(v >= -1.0 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("zero-reward episodes contribute zero reinforce gradient") {
    Tape tape;
    EpisodeTrace trace;
    trace.t_choice = 1;
    trace.reward = 0.0;
    StepRecord s0 = synthetic_step(tape, {0.2, 0.3, 0.5}, {1.0, -1.0}, true, 2);
    StepRecord s1 = synthetic_step(tape, {0.7, 0.2, 0.1}, {1.0, -1.0}, false, 0);
    Tensor mu({30});
    mu.fill(0.5);
    s0.mu = tape.leaf(mu);
    s1.mu = tape.leaf(mu);
    Tensor unc({30});
    unc.fill(0.52);
    s0.action_unclamped = unc;
    s1.action_unclamped = unc;
    trace.steps.push_back(s0);
    trace.steps.push_back(s1);
    ReturnConfig cfg{0.85, 0.9};
    Var obj = episode_reinforce_objective(tape, trace, cfg, 0.0025);
    CHECK(tape.scalar(obj) == 0.0);
    tape.backward(obj);
    for (double g : tape.grad(trace.steps[0].probs).data) CHECK(g == 0.0);
    for (double g : tape.grad(trace.steps[0].mu).data) CHECK(g == 0.0);
}

TEST_CASE("reinforce objective equals the weighted log-likelihood sum") {
    Tape tape;
    EpisodeTrace trace;
    trace.t_choice = 1;
    trace.reward = 1.0;
    StepRecord s0 = synthetic_step(tape, {0.2, 0.3, 0.5}, {1.0, -1.0}, true, 2);
    StepRecord s1 = synthetic_step(tape, {0.7, 0.2, 0.1}, {1.0, -1.0}, false, 0);
    Tensor mu({30});
    mu.fill(0.5);
    s0.mu = tape.leaf(mu);
    s1.mu = tape.leaf(mu);
    Tensor unc({30});
    unc.fill(0.54);
    s0.action_unclamped = unc;
    s1.action_unclamped = unc;
    trace.steps.push_back(s0);
    trace.steps.push_back(s1);
    double c = 0.0025;
    ReturnConfig cfg{0.85, 0.9};
    double got = tape.scalar(episode_reinforce_objective(tape, trace, cfg, c));
    double sender_term = -30.0 * 0.04 * 0.04 / (2.0 * c);
    double want = 0.85 * (std::log(0.5) + sender_term)  // G_0 = gamma * 1
                  + 1.0 * (std::log(0.7) + sender_term);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("schedule ramps the sender and keeps rates positive") {
    TrainSchedule s;
    s.lr = 1e-4;
    s.warmup_iters = 100;
    s.decay_interval = 50;
    CHECK(s.sender_lr(1) == doctest::Approx(1e-4 / 100.0));
    CHECK(s.sender_lr(50) == doctest::Approx(5e-5));
    CHECK(s.sender_lr(100) == doctest::Approx(1e-4));
    CHECK(s.sender_lr(150) == doctest::Approx(1e-4 * std::pow(0.99, 1.0)));
    CHECK(s.receiver_lr(1) == doctest::Approx(1e-4));
    CHECK(s.receiver_lr(150) == doctest::Approx(1e-4 * std::pow(0.99, 1.0)));
    for (int i = 1; i <= 300; ++i) {
        CHECK(s.sender_lr(i) > 0.0);
        CHECK(s.receiver_lr(i) > 0.0);
    }
}
