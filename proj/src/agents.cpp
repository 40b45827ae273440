#include "sketchgame/agents.hpp"

#include <algorithm>
#include <cmath>

#include "sketchgame/errors.hpp"

namespace sketchgame {

SenderPolicy::SenderPolicy(const AgentDims& dims, std::uint64_t init_seed, double exploration_c)
    : dims_(dims), c_(exploration_c) {
    Rng rng = make_rng(init_seed, 0x5e4dULL);
    int cv = dims.canvas;
    conv1_ = Conv2d(params_, "conv1", 2, 8, 3, 2, 1, rng);
    conv2_ = Conv2d(params_, "conv2", 8, 16, 3, 2, 1, rng);
    conv3_ = Conv2d(params_, "conv3", 16, 32, 3, 2, 1, rng);
    int flat = 32 * (cv / 8) * (cv / 8);
    fc1_ = Dense(params_, "fc1", flat, dims.feature_dim, rng);
    fc2_ = Dense(params_, "fc2", dims.feature_dim, 30, rng, 0.1);
}

Var SenderPolicy::mean(Tape& t, const Tensor& target_sketch, Var canvas, bool frozen) const {
    int cv = dims_.canvas;
    Var target = t.constant(target_sketch);
    Var x = t.concat({target, canvas}, {2, cv, cv});
    Var h = t.relu(conv1_.forward(t, x, frozen));
    h = t.relu(conv2_.forward(t, h, frozen));
    h = t.relu(conv3_.forward(t, h, frozen));
    h = t.reshape(h, {32 * (cv / 8) * (cv / 8)});
    h = t.relu(fc1_.forward(t, h, frozen));
    Var z = fc2_.forward(t, h, frozen);
    // squash into (margin, 1-margin)
    return t.add_scalar(t.scale(t.sigmoid(z), 1.0 - 2.0 * kActionMargin), kActionMargin);
}

Tensor SenderPolicy::draw_noise(Rng& rng) {
    Tensor n({30});
    for (double& v : n.data) v = gauss(rng);
    return n;
}

Var SenderPolicy::sample_action(Tape& t, Var mu, const Tensor& noise30, Tensor* unclamped30) const {
    double s = std::sqrt(c_);
    Tensor shift(noise30.shape);
    for (int i = 0; i < 30; ++i) shift[i] = s * noise30[i];
    Var a = t.add(mu, t.constant(shift));
    if (unclamped30) *unclamped30 = t.value(a);
    if (c_ == 0.0) return mu;  // deterministic at test time
    return t.clamp(a, kActionMargin, 1.0 - kActionMargin);
}

FeatureNet::FeatureNet(const AgentDims& dims, int num_classes, std::uint64_t init_seed)
    : dims_(dims), num_classes_(num_classes) {
    Rng rng = make_rng(init_seed, 0xfea7ULL);
    int cv = dims.canvas;
    conv1_ = Conv2d(params_, "conv1", 1, 8, 3, 2, 1, rng);
    conv2_ = Conv2d(params_, "conv2", 8, 16, 3, 2, 1, rng);
    conv3_ = Conv2d(params_, "conv3", 16, 32, 3, 2, 1, rng);
    fc_ = Dense(params_, "fc", 32 * (cv / 8) * (cv / 8), dims.feature_dim, rng);
    head_ = Dense(params_, "head", dims.feature_dim, num_classes, rng);
}

Var FeatureNet::embed(Tape& t, Var image_hw, bool frozen) const {
    int cv = dims_.canvas;
    Var x = t.reshape(image_hw, {1, cv, cv});
    Var h = t.relu(conv1_.forward(t, x, frozen));
    h = t.relu(conv2_.forward(t, h, frozen));
    h = t.relu(conv3_.forward(t, h, frozen));
    h = t.reshape(h, {32 * (cv / 8) * (cv / 8)});
    return t.relu(fc_.forward(t, h, frozen));
}

Var FeatureNet::logits(Tape& t, Var embedding, bool frozen) const {
    return head_.forward(t, embedding, frozen);
}

Tensor FeatureNet::embed_plain(const Tensor& image_hw) const {
    Tape t;
    Var v = embed(t, t.constant(image_hw), /*frozen=*/true);
    return t.value(v);
}

ReceiverPolicy::ReceiverPolicy(const FeatureNet* features, const AgentDims& dims,
                               std::uint64_t init_seed)
    : features_(features) {
    Rng rng = make_rng(init_seed, 0xece1ULL);
    // small init keeps initial logits near zero, i.e. a near-uniform policy
    key_ = Dense(params_, "key", dims.feature_dim, dims.key_dim, rng, 0.1);
    query_ = Dense(params_, "query", dims.feature_dim, dims.key_dim, rng, 0.1);
}

void ReceiverPolicy::refresh_reference_embeddings(const ReferentSet& set) {
    ref_embed_.clear();
    ref_embed_.reserve(set.referents.size());
    for (const Referent& r : set.referents) ref_embed_.push_back(features_->embed_plain(r.image));
}

const Tensor& ReceiverPolicy::reference_embedding(int ref_index) const {
    return ref_embed_.at(static_cast<size_t>(ref_index));
}

Var ReceiverPolicy::key_head(Tape& t, Var embedding, bool frozen) const {
    return key_.forward(t, embedding, frozen);
}

Var ReceiverPolicy::query_head(Tape& t, Var embedding, bool frozen) const {
    return query_.forward(t, embedding, frozen);
}

Var ReceiverPolicy::logits(Tape& t, const std::vector<int>& context_refs, Var emb_prev_canvas,
                           Var emb_cur_canvas, bool frozen) const {
    Var q = query_head(t, emb_cur_canvas, frozen);
    std::vector<Var> ls;
    ls.reserve(context_refs.size() + 1);
    for (int ref : context_refs) {
        Var k = key_head(t, t.constant(reference_embedding(ref)), frozen);
        ls.push_back(t.dot(q, k));
    }
    ls.push_back(t.dot(q, key_head(t, emb_prev_canvas, frozen)));
    return t.concat(ls);
}

ValueNet::ValueNet(const AgentDims& dims, int M, std::uint64_t init_seed) {
    Rng rng = make_rng(init_seed, 0xa15eULL);
    in_dim_ = (M + 3) * dims.feature_dim;  // I_S, M options, C_{t-1}, C_t
    fc1_ = Dense(params_, "fc1", in_dim_, dims.feature_dim, rng, 0.1);
    fc2_ = Dense(params_, "fc2", dims.feature_dim, 1, rng, 0.1);
}

Var ValueNet::value(Tape& t, Var x) const {
    Var h = t.relu(fc1_.forward(t, x));
    return t.tanh_(fc2_.forward(t, h));
}

double ValueNet::value_plain(const Tensor& x) const {
    Tape t;
    Var v = value(t, t.constant(x));
    return t.scalar(v);
}

namespace {

struct LabeledRef {
    int ref = -1;
    int label = -1;
};

}  // namespace

FeaturePretrainReport pretrain_receiver_features(FeatureNet& net, const ReferentSet& set,
                                                 const FeaturePretrainOptions& opts) {
    // carve a per-class validation slice out of the train split
    std::vector<LabeledRef> train, val;
    for (int cls : set.split_classes(Split::Train)) {
        std::vector<int> refs = set.class_refs(Split::Train, cls);
        int n_val = std::max(1, static_cast<int>(std::ceil(opts.val_fraction * refs.size())));
        for (size_t i = 0; i < refs.size(); ++i) {
            if (static_cast<int>(i) < static_cast<int>(refs.size()) - n_val)
                train.push_back({refs[i], cls});
            else
                val.push_back({refs[i], cls});
        }
    }
    if (train.empty() || val.empty()) throw ConfigError("pretrain_receiver_features: empty split");

    auto accuracy = [&](const std::vector<LabeledRef>& items) {
        int hit = 0;
        for (const LabeledRef& lr : items) {
            Tape t;
            Var e = net.embed(t, t.constant(set.referents[static_cast<size_t>(lr.ref)].image), true);
            Var z = net.logits(t, e, true);
            const Tensor& zv = t.value(z);
            int best = 0;
            for (int i = 1; i < zv.size(); ++i)
                if (zv[i] > zv[best]) best = i;
            if (best == lr.label) ++hit;
        }
        return static_cast<double>(hit) / static_cast<double>(items.size());
    };

    FeaturePretrainReport report;
    Adam adam;
    Rng rng = make_rng(opts.seed, 0xfee1ULL);
    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        net.params().zero_grad();
        double loss_sum = 0.0;
        for (int b = 0; b < opts.batch; ++b) {
            const LabeledRef& lr = train[static_cast<size_t>(uniform_int(rng, static_cast<int>(train.size())))];
            Tape t;
            Var e = net.embed(t, t.constant(set.referents[static_cast<size_t>(lr.ref)].image), false);
            Var z = net.logits(t, e, false);
            // cross-entropy: log-sum-exp(z) - z[label]
            Var p = t.softmax(z);
            Var nll = t.scale(t.log_(t.pick(p, lr.label)), -1.0);
            loss_sum += t.scalar(nll);
            t.backward(nll);
        }
        net.params().scale_grad(1.0 / opts.batch);
        adam.step(net.params(), opts.lr);
        report.loss_curve.push_back(loss_sum / opts.batch);
        if (iter % opts.eval_every == 0 || iter == opts.max_iters) {
            double acc = accuracy(val);
            report.val_accuracy = acc;
            report.iterations = iter;
            if (acc >= opts.target_accuracy) return report;
        }
    }
    throw GateError("receiver feature pretraining failed the separability gate: accuracy " +
                    std::to_string(report.val_accuracy) + " < " +
                    std::to_string(opts.target_accuracy) +
                    " (dataset too hard or feature net too small)");
}

namespace {

double copy_loss_one(const SenderPolicy& sender, const Tensor& target, const RasterConfig& raster,
                     int steps, Tape* grad_tape, const std::vector<Tensor>* hint = nullptr,
                     double hint_weight = 0.0) {
    // greedy unroll: c = 0, action = mu
    Tape local;
    Tape& t = grad_tape ? *grad_tape : local;
    bool frozen = grad_tape == nullptr;
    Var canvas = t.constant(Tensor(target.shape));
    Var coord_loss;
    for (int s = 0; s < steps; ++s) {
        Var mu = sender.mean(t, target, canvas, frozen);
        if (hint) {
            // pull the step's strokes toward the known stroke coordinates;
            // this climbs out of the soft-raster local minima
            Var d = t.sub(mu, t.constant((*hint)[static_cast<size_t>(s)]));
            Var l = t.sqnorm(d);
            coord_loss = coord_loss.valid() ? t.add(coord_loss, l) : l;
        }
        canvas = render_action(t, canvas, mu, raster);
    }
    Var diff = t.sub(canvas, t.constant(target));
    Var loss = t.sqnorm(diff);
    double out = t.scalar(loss);  // reported loss stays the pixel copy loss
    if (hint && coord_loss.valid()) loss = t.add(loss, t.scale(coord_loss, hint_weight));
    if (grad_tape) t.backward(loss);
    return out;
}

double stroke_span(const Stroke& s) {
    double dx = s.x2 - s.x0, dy = s.y2 - s.y0;
    double cx1 = s.x1 - s.x0, cy1 = s.y1 - s.y0;
    return std::sqrt(dx * dx + dy * dy) + 0.5 * std::sqrt(cx1 * cx1 + cy1 * cy1);
}

// split a quadratic Bezier at t=1/2; the halves tile the original curve
std::pair<Stroke, Stroke> split_stroke(const Stroke& s) {
    double mx0 = (s.x0 + s.x1) / 2, my0 = (s.y0 + s.y1) / 2;
    double mx1 = (s.x1 + s.x2) / 2, my1 = (s.y1 + s.y2) / 2;
    double cx = (mx0 + mx1) / 2, cy = (my0 + my1) / 2;
    return {{s.x0, s.y0, mx0, my0, cx, cy}, {cx, cy, mx1, my1, s.x2, s.y2}};
}

}  // namespace

// ground-truth strokes of a referent, subdivided (never duplicated, since
// re-composing the same ink darkens stroke skirts) into bundles of 5
std::vector<Tensor> hint_actions(const ReferentSet& set, int ref, int steps) {
    const Referent& r = set.referents[static_cast<size_t>(ref)];
    const ConceptClass& cls = set.classes[static_cast<size_t>(r.class_id)];
    std::vector<Stroke> truth = instance_strokes(cls, set.config, r.instance_seed);
    const size_t want = static_cast<size_t>(5 * steps);
    size_t body = std::min(static_cast<size_t>(std::max(cls.body_strokes, 1)), truth.size());
    auto split_longest = [&](size_t lo, size_t hi) {
        size_t longest = lo;
        for (size_t i = lo + 1; i < hi; ++i)
            if (stroke_span(truth[i]) > stroke_span(truth[longest])) longest = i;
        auto [a, b] = split_stroke(truth[longest]);
        truth[longest] = a;
        truth.insert(truth.begin() + static_cast<std::ptrdiff_t>(longest) + 1, b);
    };
    // coarse to fine: the opening bundle holds only superclass body strokes,
    // distinguishing parts arrive in later bundles
    while (body < std::min<size_t>(5, want) && truth.size() < want) {
        split_longest(0, body);
        ++body;
    }
    while (truth.size() < want) split_longest(0, truth.size());
    std::vector<Tensor> out;
    size_t g = 0;
    for (int s = 0; s < steps; ++s) {
        StrokeBundle b;
        for (int i = 0; i < 5; ++i) {
            b[static_cast<size_t>(i)] = truth[g % truth.size()];
            ++g;
        }
        Tensor a({30});
        bundle_to_flat(b, a.data.data());
        out.push_back(std::move(a));
    }
    return out;
}

double sender_copy_loss(const SenderPolicy& sender, const ReferentSet& set,
                        const RasterConfig& raster, const std::vector<int>& probe_refs, int steps) {
    double sum = 0.0;
    for (int r : probe_refs)
        sum += copy_loss_one(sender, set.referents[static_cast<size_t>(r)].image, raster, steps, nullptr);
    return sum / static_cast<double>(probe_refs.size());
}

double sender_mean_iou(const SenderPolicy& sender, const ReferentSet& set,
                       const RasterConfig& raster, const std::vector<int>& probe_refs, int steps) {
    double sum = 0.0;
    for (int r : probe_refs) {
        const Tensor& target = set.referents[static_cast<size_t>(r)].image;
        Tape t;
        Var canvas = t.constant(Tensor(target.shape));
        for (int s = 0; s < steps; ++s) {
            Var mu = sender.mean(t, target, canvas, true);
            canvas = render_action(t, canvas, mu, raster);
        }
        const Tensor& drawn = t.value(canvas);
        int inter = 0, uni = 0;
        for (int i = 0; i < target.size(); ++i) {
            bool a = drawn[i] > 0.5, b = target[i] > 0.5;
            inter += (a && b) ? 1 : 0;
            uni += (a || b) ? 1 : 0;
        }
        sum += uni > 0 ? static_cast<double>(inter) / uni : 0.0;
    }
    return sum / static_cast<double>(probe_refs.size());
}

SenderPretrainReport pretrain_sender(SenderPolicy& sender, const ReferentSet& set,
                                     const RasterConfig& raster, const SenderPretrainOptions& opts,
                                     bool enforce_gate) {
    const std::vector<int>& train_refs = set.split_refs(Split::Train);
    if (train_refs.empty()) throw ConfigError("pretrain_sender: empty train split");
    // fixed probe subset measures the gate
    std::vector<int> probes;
    for (size_t i = 0; i < train_refs.size(); i += std::max<size_t>(1, train_refs.size() / 20))
        probes.push_back(train_refs[i]);

    SenderPretrainReport report;
    report.initial_loss = sender_copy_loss(sender, set, raster, probes, opts.unroll_steps);

    Adam adam;
    Rng rng = make_rng(opts.seed, 0x5d11ULL);
    for (int iter = 1; iter <= opts.iters; ++iter) {
        sender.params().zero_grad();
        double loss_sum = 0.0;
        for (int b = 0; b < opts.batch; ++b) {
            int r = train_refs[static_cast<size_t>(uniform_int(rng, static_cast<int>(train_refs.size())))];
            Tape t;
            std::vector<Tensor> hint = hint_actions(set, r, opts.unroll_steps);
            loss_sum += copy_loss_one(sender, set.referents[static_cast<size_t>(r)].image, raster,
                                      opts.unroll_steps, &t, &hint, opts.hint_weight);
        }
        sender.params().scale_grad(1.0 / opts.batch);
        adam.step(sender.params(), opts.lr);
        report.loss_curve.push_back(loss_sum / opts.batch);
        // stop once the probe loss clears the gate; the game plays against a
        // copy policy frozen at gate quality, not an overfit tracer
        if (iter % opts.eval_every == 0 &&
            sender_copy_loss(sender, set, raster, probes, opts.unroll_steps) <=
                opts.stop_ratio * report.initial_loss)
            break;
    }

    report.final_loss = sender_copy_loss(sender, set, raster, probes, opts.unroll_steps);
    report.mean_iou = sender_mean_iou(sender, set, raster, probes, opts.unroll_steps);
    if (enforce_gate) {
        if (report.final_loss > report.initial_loss)
            throw GateError("sender pretraining diverged: loss " + std::to_string(report.final_loss) +
                            " > initial " + std::to_string(report.initial_loss));
        if (report.final_loss > 0.2 * report.initial_loss)
            throw GateError("sender pretraining missed the 80% loss-drop gate: " +
                            std::to_string(report.final_loss) + " vs initial " +
                            std::to_string(report.initial_loss));
    }
    return report;
}

}  // namespace sketchgame
