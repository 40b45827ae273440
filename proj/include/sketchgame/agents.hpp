#pragma once

#include <vector>

#include "sketchgame/nets.hpp"
#include "sketchgame/referents.hpp"
#include "sketchgame/render.hpp"

namespace sketchgame {

constexpr double kActionMargin = 1e-4;  // action components live in (margin, 1-margin)

struct AgentDims {
    int canvas = 64;
    int feature_dim = 128;
    int key_dim = 64;
};

/// Sender: conv encoder over [target sketch; canvas] emitting 30 pre-squash
/// scalars; mean is logistic-squashed into (margin, 1-margin).
class SenderPolicy {
  public:
    SenderPolicy(const AgentDims& dims, std::uint64_t init_seed, double exploration_c);

    Var mean(Tape& t, const Tensor& target_sketch, Var canvas, bool frozen = false) const;

    // a = clamp(mu + sqrt(c)*eps); gradient flows to mu through the tape.
    // noise30 is the standard-normal draw (reused on replay), unclamped30
    // receives mu + sqrt(c)*noise before clamping.
    Var sample_action(Tape& t, Var mu, const Tensor& noise30, Tensor* unclamped30 = nullptr) const;
    static Tensor draw_noise(Rng& rng);

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    double exploration_c() const { return c_; }
    void set_exploration_c(double c) { c_ = c; }

  private:
    ParameterSet params_{"sender"};
    Conv2d conv1_, conv2_, conv3_;
    Dense fc1_, fc2_;
    AgentDims dims_;
    double c_;
};

/// Frozen perceptual backbone f_R: small CNN -> feature_dim embedding, plus a
/// classifier head used only during pretraining.
class FeatureNet {
  public:
    FeatureNet(const AgentDims& dims, int num_classes, std::uint64_t init_seed);

    Var embed(Tape& t, Var image_hw, bool frozen) const;  // image [H,W] -> [feature_dim]
    Var logits(Tape& t, Var embedding, bool frozen) const;
    Tensor embed_plain(const Tensor& image_hw) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }
    int num_classes() const { return num_classes_; }

  private:
    ParameterSet params_{"features"};
    Conv2d conv1_, conv2_, conv3_;
    Dense fc_, head_;
    AgentDims dims_;
    int num_classes_;
};

/// Receiver: trainable key/query heads over frozen f_R embeddings. Action
/// logits are dot products query(current canvas) . key(option); the wait
/// option is keyed on the previous canvas.
class ReceiverPolicy {
  public:
    ReceiverPolicy(const FeatureNet* features, const AgentDims& dims, std::uint64_t init_seed);

    // Cache f_R embeddings of every referent (f_R is frozen, so this is valid
    // for the whole run).
    void refresh_reference_embeddings(const ReferentSet& set);
    const Tensor& reference_embedding(int ref_index) const;

    Var key_head(Tape& t, Var embedding, bool frozen = false) const;
    Var query_head(Tape& t, Var embedding, bool frozen = false) const;

    // logits[M+1]: M context options then wait.
    Var logits(Tape& t, const std::vector<int>& context_refs, Var emb_prev_canvas,
               Var emb_cur_canvas, bool frozen = false) const;

    const FeatureNet& features() const { return *features_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

  private:
    const FeatureNet* features_;
    ParameterSet params_{"receiver"};
    Dense key_, query_;
    std::vector<Tensor> ref_embed_;
};

/// v_phi over frozen-embedding features of (I_S, context, C_{t-1}, C_t);
/// output squashed into (-1, 1).
class ValueNet {
  public:
    ValueNet(const AgentDims& dims, int M, std::uint64_t init_seed);

    int input_dim() const { return in_dim_; }
    Var value(Tape& t, Var x) const;
    double value_plain(const Tensor& x) const;

    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

  private:
    ParameterSet params_{"value"};
    Dense fc1_, fc2_;
    int in_dim_;
};

struct FeaturePretrainOptions {
    double lr = 1e-3;
    int batch = 16;
    int max_iters = 4000;
    int eval_every = 10;  // stop close to the target: f_R is frozen at gate quality
    double target_accuracy = 0.95;
    double val_fraction = 0.2;  // of train instances, per class
    std::uint64_t seed = 7;
};

struct FeaturePretrainReport {
    double val_accuracy = 0.0;
    int iterations = 0;
    std::vector<double> loss_curve;
};

// Trains the classifier to >= target accuracy on held-out train instances,
// then the caller treats f_R as frozen. Throws GateError on failure.
FeaturePretrainReport pretrain_receiver_features(FeatureNet& net, const ReferentSet& set,
                                                 const FeaturePretrainOptions& opts);

struct SenderPretrainOptions {
    double lr = 1e-3;
    int batch = 8;
    int iters = 4000;
    int unroll_steps = 4;  // greedy render depth during pretraining
    double hint_weight = 300.0;  // weight of the stroke-coordinate guidance term
    double stop_ratio = 0.19;  // freeze the copy policy at gate quality
    int eval_every = 100;
    std::uint64_t seed = 11;
};

struct SenderPretrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double mean_iou = 0.0;  // IoU of ink>0.5 vs target, averaged over probes
    std::vector<double> loss_curve;
};

// Pixel-L2 copy pretraining through the differentiable renderer.
// Throws GateError if the loss fails to drop below 20% of the initial loss.
SenderPretrainReport pretrain_sender(SenderPolicy& sender, const ReferentSet& set,
                                     const RasterConfig& raster, const SenderPretrainOptions& opts,
                                     bool enforce_gate = true);

// Ground-truth stroke bundles of a referent, longest strokes subdivided so
// every bundle slot holds a distinct sub-curve; the copy-pretraining guide.
std::vector<Tensor> hint_actions(const ReferentSet& set, int ref, int steps);

// Copy-loss / IoU evaluation of the current sender on probe referents.
double sender_copy_loss(const SenderPolicy& sender, const ReferentSet& set,
                        const RasterConfig& raster, const std::vector<int>& probe_refs, int steps);
double sender_mean_iou(const SenderPolicy& sender, const ReferentSet& set,
                       const RasterConfig& raster, const std::vector<int>& probe_refs, int steps);

}  // namespace sketchgame
