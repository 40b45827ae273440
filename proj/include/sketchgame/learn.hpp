#pragma once

#include <vector>

#include "sketchgame/game.hpp"

namespace sketchgame {

struct ReturnConfig {
    double gamma = 0.85;
    double lambda = 0.9;
};

// Scalar view of an episode for return computation: realized rewards
// r[0..t_choice] and bootstrap values v[s] = v_phi(X_s) for s = 0..t_choice+1.
struct ReturnTrace {
    int t_choice = 0;
    std::vector<double> rewards;
    std::vector<double> values;
};

/// k-step bootstrapped Monte Carlo estimate V_N^k(X_t) with the episodic
/// cutoff h = min(t+k, t_choice): realized rewards up to h, then either the
/// discounted choice reward (h = t_choice) or the bootstrap v_phi(X_h) at a
/// wait step.
double mc_bootstrap_value(const ReturnTrace& trace, int t, int k, const ReturnConfig& cfg);

/// Episodic lambda-return: geometric mixture of V_N^1..V_N^H with
/// H = t_choice - t + 1 for t <= t_choice, and v_phi(X_t) past the choice.
double lambda_value(const ReturnTrace& trace, int t, const ReturnConfig& cfg);

// Monte Carlo cumulative-return coefficients G_t = sum_{n>=t} gamma^{n-t} r_n.
std::vector<double> reinforce_coefficients(const std::vector<double>& rewards, double gamma);

// X_s = cat(emb(I_S), emb(context), emb(C_before), emb(C_after)); s may be
// t_choice+1, built from the final canvases.
Tensor build_value_input(const EpisodeTrace& trace, int s, const ReceiverPolicy& receiver);

ReturnTrace build_return_trace(const EpisodeTrace& trace, const ReceiverPolicy& receiver,
                               const ValueNet& value);

/// Per-episode training surrogate sum_t V(X_t), built on the episode's tape:
/// V(X_t) = sum_j p_j r^j + p_wait * gamma * V_lambda(X_{t+1}). The receiver
/// expectation is analytic; the sender enters through the reparametrized
/// sample behind the canvas. With vlambda_flow=false (default) V_lambda is a
/// detached scalar; with the flag on, its bootstrap terms stay on the tape so
/// gradients flow through future canvases (value parameters stay detached
/// either way). receiver/value may be null when the flag is off.
Var episode_surrogate(Tape& tape, const EpisodeTrace& trace, const ReturnTrace& rt,
                      const ReceiverPolicy* receiver, const ValueNet* value,
                      const ReturnConfig& cfg, bool vlambda_flow);

/// REINFORCE ablation objective: sum_t G_t [log pi_R(a_Rt) + log N(a_St; mu, cI)],
/// the sender density taken at the unclamped sample. Skips the sender term
/// when c = 0.
Var episode_reinforce_objective(Tape& tape, const EpisodeTrace& trace, const ReturnConfig& cfg,
                                double exploration_c);

// Value regression: descend 0.5 ||v_phi(X_t) - V_lambda(X_t)||^2 over the
// batch; returns the mean per-step loss.
double update_value(const std::vector<EpisodeTrace>& traces,
                    const std::vector<ReturnTrace>& return_traces, const ReceiverPolicy& receiver,
                    ValueNet& value, Adam& adam, double lr, const ReturnConfig& cfg);

struct TrainSchedule {
    double lr = 1e-4;
    int warmup_iters = 2000;      // sender linear ramp; skipped when sender is fixed
    int decay_interval = 1000;
    double decay_base = 0.99;
    int iterations = 3000;        // desk default; full-scale runs use 30000
    int batch = 16;               // desk default; full-scale runs use 64

    double sender_lr(int iter) const;
    double receiver_lr(int iter) const;
};

}  // namespace sketchgame
