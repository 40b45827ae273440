#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchgame/render.hpp"
#include "sketchgame/rng.hpp"
#include "sketchgame/tensor.hpp"

namespace sketchgame {

enum class Split { Train, UnseenInstance, UnseenClass };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

// A concept archetype: curve primitives shared within a superclass plus the
// class's distinguishing primitives.
struct ConceptClass {
    int id = -1;
    std::string name;
    int superclass = -1;
    std::vector<Stroke> strokes;   // superclass body strokes first, then parts
    int body_strokes = 0;
    bool unseen = false;
};

struct Referent {
    Tensor image;  // HxW, rendered with the game rasterizer
    int class_id = -1;
    int superclass = -1;
    std::uint64_t instance_seed = 0;
    Split split = Split::Train;
};

struct ReferentConfig {
    int train_classes = 10;     // 4..10, takes a prefix of the built-in archetypes
    int unseen_classes = 4;     // 0..4
    int train_instances = 20;
    int heldout_instances = 10;  // per held-out split, per class
    double jitter_translate = 0.06;
    double jitter_rotate_deg = 12.0;
    double jitter_scale_lo = 0.9;
    double jitter_scale_hi = 1.1;
    std::uint64_t seed = 1;
    RasterConfig raster;
};

struct RoundSample {
    int sender_ref = -1;               // index into ReferentSet.referents
    std::vector<int> context_refs;     // M indices, receiver side
    int target_index = -1;             // position of the same-class image in context
};

class ReferentSet {
  public:
    ReferentConfig config;
    std::vector<ConceptClass> classes;      // train classes then unseen classes
    std::vector<Referent> referents;
    std::vector<int> split_index[3];        // referent indices per split

    const std::vector<int>& split_refs(Split s) const {
        return split_index[static_cast<int>(s)];
    }
    std::vector<int> split_classes(Split s) const;
    // referents of `cls` within split
    std::vector<int> class_refs(Split s, int cls) const;

    // Target class uniform over the split's classes; one same-class instance in
    // context, M-1 distractors from distinct other classes, target position
    // uniform, sender image disjoint from context.
    RoundSample sample_round(Split split, int M, Rng& rng) const;

    int num_train_classes() const { return config.train_classes; }
};

// Deterministic in (config, seed); every image nonblank.
ReferentSet build_referent_set(const ReferentConfig& cfg);

// f_S at desk scale is the identity: referents are already line art.
// Rejects blank images.
const Tensor& sender_target_sketch(const Referent& r);

// The built-in archetype table (pre-jitter), for tests and the manifest.
std::vector<ConceptClass> archetype_classes();

// Jittered instance geometry (the strokes actually rendered for an instance).
std::vector<Stroke> instance_strokes(const ConceptClass& cls, const ReferentConfig& cfg,
                                     std::uint64_t instance_seed);

// gen-data output: manifest JSON + one PGM per referent.
void export_referent_set(const ReferentSet& set, const std::string& dir);

}  // namespace sketchgame
