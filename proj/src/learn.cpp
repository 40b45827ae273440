#include "sketchgame/learn.hpp"

#include <cmath>

#include "sketchgame/errors.hpp"

namespace sketchgame {

double mc_bootstrap_value(const ReturnTrace& trace, int t, int k, const ReturnConfig& cfg) {
    if (t > trace.t_choice) throw NumericalError("mc_bootstrap_value: t beyond the choice step");
    if (k < 1) throw NumericalError("mc_bootstrap_value: k must be >= 1");
    int h = std::min(t + k, trace.t_choice);
    double out = 0.0;
    double disc = 1.0;
    for (int n = t; n < h; ++n) {
        out += disc * trace.rewards[static_cast<size_t>(n)];
        disc *= cfg.gamma;
    }
    // at h = t_choice the action is a choice: no bootstrap, the realized
    // reward closes the sum; at a wait step the value net takes over
    if (h == trace.t_choice)
        out += disc * trace.rewards[static_cast<size_t>(h)];
    else
        out += disc * trace.values[static_cast<size_t>(h)];
    return out;
}

double lambda_value(const ReturnTrace& trace, int t, const ReturnConfig& cfg) {
    if (t > trace.t_choice) return trace.values[static_cast<size_t>(t)];
    int H = trace.t_choice - t + 1;
    double out = 0.0;
    double lw = 1.0;  // lambda^{n-1}
    for (int n = 1; n < H; ++n) {
        out += (1.0 - cfg.lambda) * lw * mc_bootstrap_value(trace, t, n, cfg);
        lw *= cfg.lambda;
    }
    out += lw * mc_bootstrap_value(trace, t, H, cfg);
    return out;
}

std::vector<double> reinforce_coefficients(const std::vector<double>& rewards, double gamma) {
    std::vector<double> g(rewards.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
        acc = rewards[static_cast<size_t>(t)] + gamma * acc;
        g[static_cast<size_t>(t)] = acc;
    }
    return g;
}

Tensor build_value_input(const EpisodeTrace& trace, int s, const ReceiverPolicy& receiver) {
    const Tensor* emb_before;
    const Tensor* emb_after;
    if (s <= trace.t_choice) {
        emb_before = &trace.steps[static_cast<size_t>(s)].emb_before_val;
        emb_after = &trace.steps[static_cast<size_t>(s)].emb_after_val;
    } else {
        // post-choice observation: both slots hold the final canvas
        emb_before = &trace.steps.back().emb_after_val;
        emb_after = &trace.steps.back().emb_after_val;
    }
    std::vector<const Tensor*> parts;
    parts.push_back(&receiver.reference_embedding(trace.round.sender_ref));
    for (int r : trace.round.context_refs) parts.push_back(&receiver.reference_embedding(r));
    parts.push_back(emb_before);
    parts.push_back(emb_after);
    int total = 0;
    for (const Tensor* p : parts) total += p->size();
    Tensor out({total});
    int off = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() + off);
        off += p->size();
    }
    return out;
}

ReturnTrace build_return_trace(const EpisodeTrace& trace, const ReceiverPolicy& receiver,
                               const ValueNet& value) {
    ReturnTrace rt;
    rt.t_choice = trace.t_choice;
    rt.rewards = realized_rewards(trace);
    rt.values.resize(static_cast<size_t>(trace.t_choice) + 2);
    for (int s = 0; s <= trace.t_choice + 1; ++s)
        rt.values[static_cast<size_t>(s)] = value.value_plain(build_value_input(trace, s, receiver));
    return rt;
}

namespace {

// On-tape value input: frozen reference embeddings, live canvas embeddings.
Var value_input_on_tape(Tape& tape, const EpisodeTrace& trace, int s,
                        const ReceiverPolicy& receiver) {
    Var emb_before, emb_after;
    if (s <= trace.t_choice) {
        emb_before = trace.steps[static_cast<size_t>(s)].emb_before;
        emb_after = trace.steps[static_cast<size_t>(s)].emb_after;
    } else {
        emb_before = trace.steps.back().emb_after;
        emb_after = trace.steps.back().emb_after;
    }
    std::vector<Var> parts;
    parts.push_back(tape.constant(receiver.reference_embedding(trace.round.sender_ref)));
    for (int r : trace.round.context_refs)
        parts.push_back(tape.constant(receiver.reference_embedding(r)));
    parts.push_back(emb_before);
    parts.push_back(emb_after);
    return tape.concat(parts);
}

// v_phi on the tape with phi held constant (actor gradients must not move
// the critic).
Var value_on_tape_detached_params(Tape& tape, const ValueNet& value, Var x) {
    const Param* w1 = value.params().find("fc1.W");
    const Param* b1 = value.params().find("fc1.b");
    const Param* w2 = value.params().find("fc2.W");
    const Param* b2 = value.params().find("fc2.b");
    Var h = tape.relu(tape.affine(tape.constant(w1->value), tape.constant(b1->value), x));
    return tape.tanh_(tape.affine(tape.constant(w2->value), tape.constant(b2->value), h));
}

// V_lambda(X_s) as a tape expression; used by the vlambda_flow variant.
Var lambda_value_on_tape(Tape& tape, const EpisodeTrace& trace, const ReturnTrace& rt, int s,
                         const ReceiverPolicy& receiver, const ValueNet& value,
                         const ReturnConfig& cfg) {
    auto v_at = [&](int h) {
        return value_on_tape_detached_params(tape, value, trace.steps.empty()
                                                              ? Var{}
                                                              : value_input_on_tape(tape, trace, h, receiver));
    };
    if (s > rt.t_choice) return v_at(s);
    int H = rt.t_choice - s + 1;
    // accumulate per-h bootstrap coefficients and the constant reward part
    double const_part = 0.0;
    std::vector<double> v_coeff(static_cast<size_t>(rt.t_choice) + 1, 0.0);
    double lw = 1.0;
    for (int n = 1; n <= H; ++n) {
        double w = (n < H) ? (1.0 - cfg.lambda) * lw : lw;
        int h = std::min(s + n, rt.t_choice);
        double disc = 1.0;
        double part = 0.0;
        for (int m = s; m < h; ++m) {
            part += disc * rt.rewards[static_cast<size_t>(m)];
            disc *= cfg.gamma;
        }
        if (h == rt.t_choice)
            part += disc * rt.rewards[static_cast<size_t>(h)];
        else
            v_coeff[static_cast<size_t>(h)] += w * disc;
        const_part += w * part;
        if (n < H) lw *= cfg.lambda;
    }
    Var out = tape.constant(Tensor::scalar(const_part));
    for (int h = 0; h <= rt.t_choice; ++h) {
        double c = v_coeff[static_cast<size_t>(h)];
        if (c != 0.0) out = tape.add(out, tape.scale(v_at(h), c));
    }
    return out;
}

}  // namespace

Var episode_surrogate(Tape& tape, const EpisodeTrace& trace, const ReturnTrace& rt,
                      const ReceiverPolicy* receiver, const ValueNet* value,
                      const ReturnConfig& cfg, bool vlambda_flow) {
    if (vlambda_flow && (!receiver || !value))
        throw NumericalError("vlambda_flow needs receiver and value networks");
    Var total;
    for (int t = 0; t <= trace.t_choice; ++t) {
        const StepRecord& step = trace.steps[static_cast<size_t>(t)];
        const int M = static_cast<int>(step.option_rewards.size());
        bool wait_allowed = false;
        for (int j : step.allowed)
            if (j == M) wait_allowed = true;
        Var vt;
        Tensor coeff({M + 1});
        for (int j = 0; j < M; ++j) coeff[j] = step.option_rewards[static_cast<size_t>(j)];
        if (wait_allowed && vlambda_flow) {
            // split image terms (constant coefficients) from the live wait term
            Var img = tape.dot_const(step.probs, coeff);
            Var vl = lambda_value_on_tape(tape, trace, rt, t + 1, *receiver, *value, cfg);
            Var wait_term = tape.mul(tape.pick(step.probs, M), tape.scale(vl, cfg.gamma));
            vt = tape.add(img, wait_term);
        } else {
            if (wait_allowed) coeff[M] = cfg.gamma * lambda_value(rt, t + 1, cfg);
            vt = tape.dot_const(step.probs, coeff);
        }
        total = (t == 0) ? vt : tape.add(total, vt);
    }
    return total;
}

Var episode_reinforce_objective(Tape& tape, const EpisodeTrace& trace, const ReturnConfig& cfg,
                                double exploration_c) {
    std::vector<double> g = reinforce_coefficients(realized_rewards(trace), cfg.gamma);
    Var total = tape.constant(Tensor::scalar(0.0));
    for (int t = 0; t <= trace.t_choice; ++t) {
        const StepRecord& step = trace.steps[static_cast<size_t>(t)];
        double gt = g[static_cast<size_t>(t)];
        if (gt == 0.0) continue;
        // receiver: categorical log-prob of the sampled action
        Var logp_r = tape.log_(tape.pick(step.probs, step.receiver_action));
        total = tape.add(total, tape.scale(logp_r, gt));
        // sender: Gaussian log-density at the unclamped sample (constant and
        // normalization terms drop out of the gradient)
        if (exploration_c > 0.0) {
            Var diff = tape.sub(tape.constant(step.action_unclamped), step.mu);
            Var logp_s = tape.scale(tape.sqnorm(diff), -0.5 / exploration_c);
            total = tape.add(total, tape.scale(logp_s, gt));
        }
    }
    return total;
}

double update_value(const std::vector<EpisodeTrace>& traces,
                    const std::vector<ReturnTrace>& return_traces, const ReceiverPolicy& receiver,
                    ValueNet& value, Adam& adam, double lr, const ReturnConfig& cfg) {
    value.params().zero_grad();
    double loss_sum = 0.0;
    int count = 0;
    for (size_t e = 0; e < traces.size(); ++e) {
        const EpisodeTrace& trace = traces[e];
        const ReturnTrace& rt = return_traces[e];
        Tape tape;
        Var loss;
        for (int t = 0; t <= trace.t_choice; ++t) {
            double target = lambda_value(rt, t, cfg);  // detached regression target
            Var x = tape.constant(build_value_input(trace, t, receiver));
            Var v = value.value(tape, x);
            Var d = tape.sub(v, tape.constant(Tensor::scalar(target)));
            Var l = tape.scale(tape.square(d), 0.5);
            loss = loss.valid() ? tape.add(loss, l) : l;
            ++count;
        }
        loss_sum += tape.scalar(loss);
        tape.backward(loss);
    }
    if (count > 0) value.params().scale_grad(1.0 / count);
    adam.step(value.params(), lr);
    return count > 0 ? loss_sum / count : 0.0;
}

double TrainSchedule::sender_lr(int iter) const {
    if (iter < warmup_iters)
        return lr * static_cast<double>(iter) / static_cast<double>(std::max(1, warmup_iters));
    return lr * std::pow(decay_base,
                         static_cast<double>(iter - warmup_iters) / static_cast<double>(decay_interval));
}

double TrainSchedule::receiver_lr(int iter) const {
    if (iter < warmup_iters) return lr;
    return lr * std::pow(decay_base,
                         static_cast<double>(iter - warmup_iters) / static_cast<double>(decay_interval));
}

}  // namespace sketchgame
