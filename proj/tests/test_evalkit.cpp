#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sketchgame/evalkit.hpp"

using namespace sketchgame;

namespace {

ReferentConfig small_config() {
    ReferentConfig cfg;
    cfg.train_classes = 10;
    cfg.unseen_classes = 0;
    cfg.train_instances = 4;
    cfg.heldout_instances = 1;
    cfg.raster.width = 32;
    cfg.raster.height = 32;
    return cfg;
}

const ReferentSet& small_set() {
    static ReferentSet set = build_referent_set(small_config());
    return set;
}

AgentDims small_dims() {
    AgentDims d;
    d.canvas = 32;
    d.feature_dim = 32;
    d.key_dim = 16;
    return d;
}

const FeatureNet& small_features() {
    static FeatureNet net(small_dims(), 10, 7);
    return net;
}

// Corpus whose canvases are the referent images themselves.
SketchCorpus image_corpus(int per_class) {
    const ReferentSet& set = small_set();
    SketchCorpus corpus;
    corpus.setting = "synthetic";
    for (int cls : set.split_classes(Split::Train)) {
        // every instance of the class, so corpus centroids equal image centroids
        std::vector<int> refs;
        for (size_t i = 0; i < set.referents.size(); ++i)
            if (set.referents[i].class_id == cls) refs.push_back(static_cast<int>(i));
        // whole cycles only, keeping every instance equally weighted
        int cycles = std::max(1, per_class / static_cast<int>(refs.size()));
        for (int i = 0; i < cycles * static_cast<int>(refs.size()); ++i) {
            const Referent& r = set.referents[static_cast<size_t>(refs[static_cast<size_t>(i) % refs.size()])];
            CorpusEntry e;
            e.canvas = r.image;
            e.class_id = cls;
            e.superclass = r.superclass;
            corpus.entries.push_back(std::move(e));
        }
    }
    return corpus;
}

SketchCorpus noise_corpus(int per_class, std::uint64_t seed) {
    const ReferentSet& set = small_set();
    SketchCorpus corpus;
    corpus.setting = "noise";
    Rng rng = make_rng(seed);
    for (int cls : set.split_classes(Split::Train)) {
        for (int i = 0; i < per_class; ++i) {
            CorpusEntry e;
            e.canvas = Tensor({32, 32});
            for (double& v : e.canvas.data) v = uniform(rng);
            e.class_id = cls;
            e.superclass = set.classes[static_cast<size_t>(cls)].superclass;
            corpus.entries.push_back(std::move(e));
        }
    }
    return corpus;
}

}  // namespace

TEST_CASE("spearman correlation on hand data") {
    CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3, 4}, {5, 4, 3, 2}) == doctest::Approx(-1.0));
    // monotone but nonlinear is still a perfect rank correlation
    CHECK(spearman_rho({1, 2, 3, 4}, {1, 8, 27, 64}) == doctest::Approx(1.0));
    double r = spearman_rho({1, 2, 3, 4, 5, 6}, {2, 1, 4, 3, 6, 5});
    CHECK(r > 0.5);
    CHECK(r < 1.0);
}

TEST_CASE("topographic correlation of image sketches against images is one") {
    SketchCorpus corpus = image_corpus(4);
    TopoResult t = semanticity_topo(corpus, small_set(), small_features(), 2000, 7);
    CHECK_FALSE(t.degenerate);
    CHECK(t.rho == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.p_value < 0.05);
}

TEST_CASE("permuted labels give near-zero correlation almost always") {
    SketchCorpus corpus = image_corpus(4);
    // shuffle class labels of the entries, breaking the topography
    Rng rng = make_rng(123);
    std::vector<int> classes = small_set().split_classes(Split::Train);
    int low = 0, total = 0;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<int> perm = classes;
        for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
            std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(uniform_int(rng, i + 1))]);
        SketchCorpus shuffled = corpus;
        for (CorpusEntry& e : shuffled.entries)
            e.class_id = perm[static_cast<size_t>(e.class_id)];
        TopoResult t = semanticity_topo(shuffled, small_set(), small_features(), 50, 7);
        ++total;
        if (std::abs(t.rho) < 0.3) ++low;
    }
    CHECK(low >= total - 2);
}

TEST_CASE("probe separates class-identical canvases perfectly") {
    SketchCorpus corpus = image_corpus(6);
    // collapse each class to a single repeated canvas
    for (CorpusEntry& e : corpus.entries) {
        int first = small_set().class_refs(Split::Train, e.class_id)[0];
        e.canvas = small_set().referents[static_cast<size_t>(first)].image;
    }
    ProbeResult r = symbolicity_probe(corpus, small_features(), 42);
    CHECK(r.classes_used == 10);
    CHECK(r.accuracy == doctest::Approx(1.0));
}

TEST_CASE("probe on noise canvases is near chance") {
    SketchCorpus corpus = noise_corpus(10, 5);
    ProbeResult r = symbolicity_probe(corpus, small_features(), 42);
    CHECK(r.accuracy < 1.0 / 10.0 + 0.2);
}

TEST_CASE("probe excludes undersized classes with a warning") {
    SketchCorpus corpus = image_corpus(5);
    // strip one class down to 2 canvases
    SketchCorpus pruned;
    int removed = 0;
    for (CorpusEntry& e : corpus.entries) {
        if (e.class_id == 0 && removed < 3) {
            ++removed;
            continue;
        }
        pruned.entries.push_back(e);
    }
    ProbeResult r = symbolicity_probe(pruned, small_features(), 42);
    CHECK(r.classes_used == 9);
}

TEST_CASE("iconicity of the images themselves is near maximal") {
    SketchCorpus corpus = image_corpus(4);
    double self = iconicity_score(corpus, small_set(), small_features());
    // individual instances may sit marginally closer to a neighboring class
    // centroid (sibling classes share strokes), so demand a high floor rather
    // than exactly rank one everywhere
    CHECK(self >= 0.9);
    double noise = iconicity_score(noise_corpus(20, 11), small_set(), small_features());
    CHECK(self > noise);
}

TEST_CASE("iconicity of noise approaches the uniform-rank oracle") {
    SketchCorpus corpus = noise_corpus(20, 11);
    double got = iconicity_score(corpus, small_set(), small_features());
    int N = 10;
    double uniform_mrr = 0;
    for (int k = 1; k <= N; ++k) uniform_mrr += 1.0 / k;
    uniform_mrr /= N;
    // noise is not perfectly uniform over ranks; allow a generous band
    CHECK(got < 0.85);
    CHECK(got > uniform_mrr * 0.3);
}

TEST_CASE("pca projection basics") {
    SketchCorpus one;
    CorpusEntry e;
    e.canvas = small_set().referents[0].image;
    e.class_id = 0;
    one.entries.push_back(e);
    auto coords = pca_projection(one, small_features());
    CHECK(coords[0][0] == 0.0);
    CHECK(coords[0][1] == 0.0);

    SketchCorpus corpus = image_corpus(4);
    auto c1 = pca_projection(corpus, small_features());
    // duplicated corpus projects to identical point pairs
    SketchCorpus doubled = corpus;
    for (const CorpusEntry& en : corpus.entries) doubled.entries.push_back(en);
    auto c2 = pca_projection(doubled, small_features());
    size_t n = corpus.entries.size();
    for (size_t i = 0; i < n; ++i) {
        CHECK(c2[i][0] == doctest::Approx(c2[i + n][0]).epsilon(1e-9));
        CHECK(c2[i][1] == doctest::Approx(c2[i + n][1]).epsilon(1e-9));
    }
    // PC1 captures at least as much variance as PC2
    double v1 = 0, v2 = 0;
    for (auto& p : c1) {
        v1 += p[0] * p[0];
        v2 += p[1] * p[1];
    }
    CHECK(v1 >= v2);
    // determinism
    auto c3 = pca_projection(corpus, small_features());
    for (size_t i = 0; i < n; ++i) {
        CHECK(c1[i][0] == c3[i][0]);
        CHECK(c1[i][1] == c3[i][1]);
    }
}

TEST_CASE("untrained evaluation games sit near chance and reports stay in range") {
    const ReferentSet& set = small_set();
    AgentDims dims = small_dims();
    SenderPolicy sender(dims, 5, 0.0);
    FeatureNet features(dims, 10, 7);
    ReceiverPolicy receiver(&features, dims, 11);
    receiver.refresh_reference_embeddings(set);
    GameSetting setting = GameSetting::by_name("one-step");
    EvalGamesResult r = evaluate_games(sender, receiver, set, Split::Train, setting, 3, 999, 3);
    CHECK(r.episodes == 120);  // 40 train refs x 3 reps
    CHECK(r.success >= 0.0);
    CHECK(r.success <= 1.0);
    CHECK(std::abs(r.success - 1.0 / 3.0) < 0.15);
    CHECK(r.avg_steps == 1.0);
}

TEST_CASE("forced accuracy helper runs the requested horizon") {
    const ReferentSet& set = small_set();
    AgentDims dims = small_dims();
    SenderPolicy sender(dims, 5, 0.0);
    FeatureNet features(dims, 10, 7);
    ReceiverPolicy receiver(&features, dims, 11);
    receiver.refresh_reference_embeddings(set);
    double acc = forced_step_accuracy(sender, receiver, set, Split::Train, 3, 2, 30, 1234);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}
