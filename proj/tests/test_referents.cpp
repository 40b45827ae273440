#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "sketchgame/referents.hpp"

using namespace sketchgame;

namespace {

const ReferentSet& shared_set() {
    static ReferentSet set = build_referent_set(ReferentConfig{});
    return set;
}

double pixel_dist(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (int i = 0; i < a.size(); ++i) {
        double d = a.data[static_cast<size_t>(i)] - b.data[static_cast<size_t>(i)];
        s += d * d;
    }
    return s;
}

}  // namespace

TEST_CASE("dataset counts follow the configuration") {
    const ReferentSet& set = shared_set();
    CHECK(set.split_refs(Split::Train).size() == 200);          // 10 classes x 20
    CHECK(set.split_refs(Split::UnseenInstance).size() == 100); // 10 classes x 10
    CHECK(set.split_refs(Split::UnseenClass).size() == 40);     // 4 classes x 10
    CHECK(set.classes.size() == 14);
    CHECK(set.split_classes(Split::Train).size() == 10);
    CHECK(set.split_classes(Split::UnseenClass).size() == 4);
}

TEST_CASE("three superclasses cover the train classes and one unseen class is novel") {
    const ReferentSet& set = shared_set();
    std::set<int> train_supers;
    for (int c : set.split_classes(Split::Train))
        train_supers.insert(set.classes[static_cast<size_t>(c)].superclass);
    CHECK(train_supers == std::set<int>{0, 1, 2});
    bool has_novel = false;
    for (int c : set.split_classes(Split::UnseenClass))
        if (set.classes[static_cast<size_t>(c)].superclass == 3) has_novel = true;
    CHECK(has_novel);
}

TEST_CASE("every referent image is nonblank and bounded") {
    const ReferentSet& set = shared_set();
    for (const Referent& r : set.referents) {
        double ink = r.image.sum();
        CHECK(ink >= 0.01 * r.image.size());
        for (double v : r.image.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("dataset generation is deterministic in config and seed") {
    ReferentConfig cfg;
    cfg.train_classes = 4;
    cfg.unseen_classes = 1;
    cfg.train_instances = 3;
    cfg.heldout_instances = 2;
    ReferentSet a = build_referent_set(cfg);
    ReferentSet b = build_referent_set(cfg);
    REQUIRE(a.referents.size() == b.referents.size());
    for (size_t i = 0; i < a.referents.size(); ++i)
        for (int j = 0; j < a.referents[i].image.size(); ++j)
            CHECK(a.referents[i].image.data[static_cast<size_t>(j)] ==
                  b.referents[i].image.data[static_cast<size_t>(j)]);
    cfg.seed = 2;
    ReferentSet c = build_referent_set(cfg);
    double diff = 0;
    for (size_t i = 0; i < a.referents.size(); ++i)
        diff += pixel_dist(a.referents[i].image, c.referents[i].image);
    CHECK(diff > 0.0);
}

TEST_CASE("round sampling satisfies the context contract") {
    const ReferentSet& set = shared_set();
    Rng rng = make_rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        RoundSample r = set.sample_round(Split::Train, 3, rng);
        const Referent& sref = set.referents[static_cast<size_t>(r.sender_ref)];
        CHECK(sref.split == Split::Train);
        REQUIRE(r.context_refs.size() == 3);
        REQUIRE(r.target_index >= 0);
        REQUIRE(r.target_index < 3);
        std::set<int> ctx_classes;
        for (int j = 0; j < 3; ++j) {
            const Referent& cr = set.referents[static_cast<size_t>(r.context_refs[static_cast<size_t>(j)])];
            ctx_classes.insert(cr.class_id);
            CHECK(r.context_refs[static_cast<size_t>(j)] != r.sender_ref);
            if (j == r.target_index)
                CHECK(cr.class_id == sref.class_id);
            else
                CHECK(cr.class_id != sref.class_id);
        }
        CHECK(ctx_classes.size() == 3);  // distractors from distinct classes
    }
}

TEST_CASE("target position and class are close to uniform") {
    const ReferentSet& set = shared_set();
    Rng rng = make_rng(103);
    const int N = 6000;
    std::map<int, int> pos_counts, class_counts;
    for (int i = 0; i < N; ++i) {
        RoundSample r = set.sample_round(Split::Train, 3, rng);
        pos_counts[r.target_index]++;
        class_counts[set.referents[static_cast<size_t>(r.sender_ref)].class_id]++;
    }
    for (auto& [pos, n] : pos_counts)
        CHECK(std::abs(n / static_cast<double>(N) - 1.0 / 3.0) < 0.03);
    REQUIRE(class_counts.size() == 10);
    for (auto& [cls, n] : class_counts)
        CHECK(std::abs(n / static_cast<double>(N) - 0.1) < 0.02);
}

TEST_CASE("held-out instances are recognized by a pixel nearest-neighbor oracle") {
    const ReferentSet& set = shared_set();
    int correct = 0, total = 0;
    for (int idx : set.split_refs(Split::UnseenInstance)) {
        const Referent& q = set.referents[static_cast<size_t>(idx)];
        double best = 1e300;
        int best_cls = -1;
        for (int tr : set.split_refs(Split::Train)) {
            const Referent& c = set.referents[static_cast<size_t>(tr)];
            double d = pixel_dist(q.image, c.image);
            if (d < best) {
                best = d;
                best_cls = c.class_id;
            }
        }
        correct += best_cls == q.class_id ? 1 : 0;
        ++total;
    }
    // sibling classes share one of their two distinguishing parts, which caps
    // naive pixel matching well below a learned classifier; this is a floor
    CHECK(static_cast<double>(correct) / total >= 0.7);
}

TEST_CASE("jitter keeps strokes inside the unit square") {
    const ReferentSet& set = shared_set();
    for (const ConceptClass& cls : set.classes) {
        std::vector<Stroke> strokes = instance_strokes(cls, set.config, 1234567ULL);
        for (const Stroke& s : strokes)
            for (double v : {s.x0, s.y0, s.x1, s.y1, s.x2, s.y2}) {
                CHECK(v > 0.0);
                CHECK(v < 1.0);
            }
    }
}

TEST_CASE("export writes a manifest and one image per referent") {
    ReferentConfig cfg;
    cfg.train_classes = 4;
    cfg.unseen_classes = 0;
    cfg.train_instances = 2;
    cfg.heldout_instances = 1;
    ReferentSet set = build_referent_set(cfg);
    export_referent_set(set, "/tmp/sg_test_dataset");
    CHECK(std::ifstream("/tmp/sg_test_dataset/manifest.json").good());
    for (size_t i = 0; i < set.referents.size(); ++i) {
        Tensor img = read_pgm("/tmp/sg_test_dataset/images/ref_" + std::to_string(i) + ".pgm");
        CHECK(img.size() == set.referents[i].image.size());
    }
}
