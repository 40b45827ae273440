#include "sketchgame/referents.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sketchgame/errors.hpp"

namespace sketchgame {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::UnseenInstance: return "unseen-instance";
        case Split::UnseenClass: return "unseen-class";
    }
    return "?";
}

Split split_from_name(const std::string& s) {
    if (s == "train" || s == "seen") return Split::Train;
    if (s == "unseen-instance") return Split::UnseenInstance;
    if (s == "unseen-class") return Split::UnseenClass;
    throw ConfigError("unknown split: " + s);
}

namespace {

Stroke line(double ax, double ay, double bx, double by) {
    return {ax, ay, (ax + bx) / 2, (ay + by) / 2, bx, by};
}

Stroke curve(double ax, double ay, double cx, double cy, double bx, double by) {
    return {ax, ay, cx, cy, bx, by};
}

std::vector<Stroke> quadruped_body() {
    return {
        curve(0.25, 0.45, 0.50, 0.38, 0.75, 0.45),  // back
        line(0.28, 0.62, 0.72, 0.62),               // belly
        line(0.32, 0.60, 0.30, 0.80),               // legs
        line(0.42, 0.60, 0.42, 0.80),
        line(0.58, 0.60, 0.58, 0.80),
        line(0.68, 0.60, 0.70, 0.80),
    };
}

std::vector<Stroke> vessel_body() {
    return {
        curve(0.25, 0.55, 0.50, 0.90, 0.75, 0.55),  // hull
        line(0.25, 0.55, 0.75, 0.55),               // rim
    };
}

std::vector<Stroke> tool_body() {
    return {
        line(0.35, 0.80, 0.62, 0.25),  // shaft
    };
}

std::vector<Stroke> with(std::vector<Stroke> base, std::vector<Stroke> extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
}

}  // namespace

// Each class pairs two multi-stroke parts over a shared body; any single
// part is shared with a sibling class, so identification needs both.
namespace {

std::vector<Stroke> part_ears() {
    return {curve(0.30, 0.45, 0.24, 0.20, 0.30, 0.06), curve(0.40, 0.45, 0.34, 0.20, 0.40, 0.06),
            line(0.30, 0.06, 0.40, 0.06)};
}
std::vector<Stroke> part_neck() {
    return {line(0.70, 0.45, 0.86, 0.08), curve(0.86, 0.08, 0.99, 0.04, 0.95, 0.18),
            line(0.95, 0.18, 0.87, 0.15)};
}
std::vector<Stroke> part_horns() {
    return {curve(0.30, 0.42, 0.06, 0.40, 0.06, 0.12), curve(0.30, 0.42, 0.54, 0.40, 0.54, 0.12),
            line(0.22, 0.34, 0.40, 0.34)};
}
std::vector<Stroke> part_tail() {
    return {curve(0.75, 0.48, 0.97, 0.42, 0.95, 0.80), curve(0.95, 0.80, 0.83, 0.90, 0.80, 0.72),
            line(0.95, 0.80, 0.99, 0.90)};
}
std::vector<Stroke> part_hump() {
    return {curve(0.38, 0.44, 0.51, 0.18, 0.64, 0.44), curve(0.42, 0.44, 0.51, 0.28, 0.60, 0.44),
            line(0.42, 0.44, 0.60, 0.44)};
}
std::vector<Stroke> part_sail() {
    return {line(0.50, 0.55, 0.50, 0.12), curve(0.50, 0.14, 0.76, 0.30, 0.50, 0.46),
            line(0.50, 0.46, 0.70, 0.46)};
}
std::vector<Stroke> part_handle() {
    return {curve(0.75, 0.56, 0.97, 0.58, 0.80, 0.74), curve(0.77, 0.60, 0.92, 0.62, 0.79, 0.70),
            line(0.75, 0.56, 0.77, 0.60)};
}
std::vector<Stroke> part_lid() {
    return {line(0.22, 0.47, 0.78, 0.47), curve(0.44, 0.41, 0.50, 0.33, 0.56, 0.41),
            line(0.50, 0.41, 0.50, 0.47)};
}
std::vector<Stroke> part_funnel() {
    return {line(0.32, 0.52, 0.32, 0.20), line(0.32, 0.20, 0.45, 0.26), line(0.32, 0.32, 0.42, 0.36)};
}
std::vector<Stroke> part_blade() {
    return {curve(0.62, 0.25, 0.88, 0.24, 0.84, 0.52), line(0.62, 0.25, 0.78, 0.46),
            line(0.84, 0.52, 0.74, 0.54)};
}
std::vector<Stroke> part_crossbar() {
    return {line(0.34, 0.11, 0.92, 0.40), line(0.34, 0.11, 0.40, 0.30), line(0.86, 0.26, 0.92, 0.40)};
}
std::vector<Stroke> part_tines() {
    return {line(0.62, 0.25, 0.48, 0.06), line(0.62, 0.25, 0.64, 0.02), line(0.62, 0.25, 0.84, 0.08)};
}
std::vector<Stroke> part_hook() {
    return {curve(0.62, 0.25, 0.74, 0.02, 0.86, 0.24), line(0.86, 0.24, 0.80, 0.16),
            line(0.62, 0.25, 0.68, 0.14)};
}

}  // namespace

std::vector<ConceptClass> archetype_classes() {
    std::vector<ConceptClass> out;
    auto add = [&](const std::string& name, int super, std::vector<Stroke> body,
                   std::vector<Stroke> parts, bool unseen) {
        ConceptClass c;
        c.id = static_cast<int>(out.size());
        c.name = name;
        c.superclass = super;
        c.body_strokes = static_cast<int>(body.size());
        c.strokes = with(std::move(body), std::move(parts));
        c.unseen = unseen;
        out.push_back(std::move(c));
    };

    // superclass 0: quadrupeds
    add("ear-tail", 0, quadruped_body(), with(part_ears(), part_tail()), false);
    add("neck-horn", 0, quadruped_body(), with(part_neck(), part_horns()), false);
    add("ear-horn", 0, quadruped_body(), with(part_ears(), part_horns()), false);
    add("neck-tail", 0, quadruped_body(), with(part_neck(), part_tail()), false);
    // superclass 1: vessels
    add("sail-handle", 1, vessel_body(), with(part_sail(), part_handle()), false);
    add("handle-lid", 1, vessel_body(), with(part_handle(), part_lid()), false);
    add("sail-lid", 1, vessel_body(), with(part_sail(), part_lid()), false);
    // superclass 2: tools
    add("blade-bar", 2, tool_body(), with(part_blade(), part_crossbar()), false);
    add("bar-tines", 2, tool_body(), with(part_crossbar(), part_tines()), false);
    add("blade-tines", 2, tool_body(), with(part_blade(), part_tines()), false);

    // unseen classes: new part pairs in known superclasses + a novel superclass
    add("hump-tail", 0, quadruped_body(), with(part_hump(), part_tail()), true);
    add("funnel-handle", 1, vessel_body(), with(part_funnel(), part_handle()), true);
    add("hook-bar", 2, tool_body(), with(part_hook(), part_crossbar()), true);
    add("ring", 3,
        {curve(0.72, 0.45, 0.72, 0.67, 0.50, 0.67), curve(0.50, 0.67, 0.28, 0.67, 0.28, 0.45),
         curve(0.28, 0.45, 0.28, 0.23, 0.50, 0.23), curve(0.50, 0.23, 0.72, 0.23, 0.72, 0.45)},
        {curve(0.64, 0.45, 0.64, 0.59, 0.50, 0.59), curve(0.50, 0.31, 0.36, 0.31, 0.36, 0.45)},
        true);
    return out;
}

std::vector<Stroke> instance_strokes(const ConceptClass& cls, const ReferentConfig& cfg,
                                     std::uint64_t instance_seed) {
    Rng rng = make_rng(instance_seed);
    double th = (2.0 * uniform(rng) - 1.0) * cfg.jitter_rotate_deg * 3.14159265358979323846 / 180.0;
    double sc = cfg.jitter_scale_lo + (cfg.jitter_scale_hi - cfg.jitter_scale_lo) * uniform(rng);
    double tx = (2.0 * uniform(rng) - 1.0) * cfg.jitter_translate;
    double ty = (2.0 * uniform(rng) - 1.0) * cfg.jitter_translate;
    double c = std::cos(th), s = std::sin(th);
    auto xf = [&](double x, double y, double& ox, double& oy) {
        double dx = x - 0.5, dy = y - 0.5;
        ox = 0.5 + sc * (c * dx - s * dy) + tx;
        oy = 0.5 + sc * (s * dx + c * dy) + ty;
        ox = std::min(1.0 - 1e-3, std::max(1e-3, ox));
        oy = std::min(1.0 - 1e-3, std::max(1e-3, oy));
    };
    std::vector<Stroke> out;
    out.reserve(cls.strokes.size());
    for (const Stroke& p : cls.strokes) {
        Stroke q;
        xf(p.x0, p.y0, q.x0, q.y0);
        xf(p.x1, p.y1, q.x1, q.y1);
        xf(p.x2, p.y2, q.x2, q.y2);
        out.push_back(q);
    }
    return out;
}

namespace {

Tensor render_strokes(const std::vector<Stroke>& strokes, const RasterConfig& raster) {
    Tensor c({raster.height, raster.width});
    for (const Stroke& s : strokes) c = compose(c, rasterize_stroke(s, raster));
    return c;
}

}  // namespace

ReferentSet build_referent_set(const ReferentConfig& cfg) {
    auto all = archetype_classes();
    const int max_train = 10, max_unseen = 4;
    if (cfg.train_classes < 4 || cfg.train_classes > max_train)
        throw ConfigError("train_classes must be in [4,10]");
    if (cfg.unseen_classes < 0 || cfg.unseen_classes > max_unseen)
        throw ConfigError("unseen_classes must be in [0,4]");
    if (cfg.train_instances < 2 || cfg.heldout_instances < 1)
        throw ConfigError("instance counts too small");

    ReferentSet set;
    set.config = cfg;
    for (int i = 0; i < cfg.train_classes; ++i) set.classes.push_back(all[static_cast<size_t>(i)]);
    for (int i = 0; i < cfg.unseen_classes; ++i)
        set.classes.push_back(all[static_cast<size_t>(max_train + i)]);
    // ids re-assigned to be contiguous in this set
    for (size_t i = 0; i < set.classes.size(); ++i) set.classes[i].id = static_cast<int>(i);

    double min_ink = 0.01 * cfg.raster.width * cfg.raster.height;
    auto add_ref = [&](const ConceptClass& cls, Split split, int instance) {
        Referent r;
        // instance index spaces are disjoint across splits
        int base = split == Split::Train ? 0 : (split == Split::UnseenInstance ? 1000 : 2000);
        r.instance_seed = hash_mix(hash_mix(cfg.seed, static_cast<std::uint64_t>(cls.name.size() * 131 + cls.id)),
                                   static_cast<std::uint64_t>(base + instance));
        r.image = render_strokes(instance_strokes(cls, cfg, r.instance_seed), cfg.raster);
        if (r.image.sum() < min_ink)
            throw NumericalError("blank referent generated for class " + cls.name);
        r.class_id = cls.id;
        r.superclass = cls.superclass;
        r.split = split;
        set.split_index[static_cast<int>(split)].push_back(static_cast<int>(set.referents.size()));
        set.referents.push_back(std::move(r));
    };

    for (const ConceptClass& cls : set.classes) {
        if (cls.unseen) {
            for (int i = 0; i < cfg.heldout_instances; ++i) add_ref(cls, Split::UnseenClass, i);
        } else {
            for (int i = 0; i < cfg.train_instances; ++i) add_ref(cls, Split::Train, i);
            for (int i = 0; i < cfg.heldout_instances; ++i) add_ref(cls, Split::UnseenInstance, i);
        }
    }
    return set;
}

std::vector<int> ReferentSet::split_classes(Split s) const {
    std::vector<int> out;
    for (const ConceptClass& c : classes) {
        bool in = (s == Split::UnseenClass) ? c.unseen : !c.unseen;
        if (in) out.push_back(c.id);
    }
    return out;
}

std::vector<int> ReferentSet::class_refs(Split s, int cls) const {
    std::vector<int> out;
    for (int i : split_refs(s))
        if (referents[static_cast<size_t>(i)].class_id == cls) out.push_back(i);
    return out;
}

RoundSample ReferentSet::sample_round(Split split, int M, Rng& rng) const {
    std::vector<int> cls = split_classes(split);
    if (static_cast<int>(cls.size()) < M)
        throw ConfigError("sample_round: split has fewer than M classes");
    // target class, then sender instance + a distinct same-class instance
    int target_cls = cls[static_cast<size_t>(uniform_int(rng, static_cast<int>(cls.size())))];
    std::vector<int> pool = class_refs(split, target_cls);
    if (pool.size() < 2) throw ConfigError("sample_round: class needs >= 2 instances");
    int si = uniform_int(rng, static_cast<int>(pool.size()));
    int ti = uniform_int(rng, static_cast<int>(pool.size()) - 1);
    if (ti >= si) ++ti;
    RoundSample out;
    out.sender_ref = pool[static_cast<size_t>(si)];
    int target_ref = pool[static_cast<size_t>(ti)];
    // distractors from M-1 distinct other classes
    std::vector<int> others;
    for (int c : cls)
        if (c != target_cls) others.push_back(c);
    for (int k = 0; k < M - 1; ++k) {
        int j = k + uniform_int(rng, static_cast<int>(others.size()) - k);
        std::swap(others[static_cast<size_t>(k)], others[static_cast<size_t>(j)]);
    }
    out.target_index = uniform_int(rng, M);
    int oi = 0;
    for (int pos = 0; pos < M; ++pos) {
        if (pos == out.target_index) {
            out.context_refs.push_back(target_ref);
        } else {
            std::vector<int> dpool = class_refs(split, others[static_cast<size_t>(oi++)]);
            out.context_refs.push_back(dpool[static_cast<size_t>(uniform_int(rng, static_cast<int>(dpool.size())))]);
        }
    }
    return out;
}

const Tensor& sender_target_sketch(const Referent& r) {
    if (r.image.sum() <= 0.0) throw NumericalError("sender_target_sketch: blank referent image");
    return r.image;
}

void export_referent_set(const ReferentSet& set, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::create_directories(dir + "/images");
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = set.config.seed;
    j["train_classes"] = set.config.train_classes;
    j["unseen_classes"] = set.config.unseen_classes;
    j["train_instances"] = set.config.train_instances;
    j["heldout_instances"] = set.config.heldout_instances;
    j["classes"] = nlohmann::json::array();
    for (const ConceptClass& c : set.classes) {
        j["classes"].push_back({{"id", c.id},
                                {"name", c.name},
                                {"superclass", c.superclass},
                                {"unseen", c.unseen}});
    }
    j["referents"] = nlohmann::json::array();
    for (size_t i = 0; i < set.referents.size(); ++i) {
        const Referent& r = set.referents[i];
        std::string file = "images/ref_" + std::to_string(i) + ".pgm";
        write_pgm(dir + "/" + file, r.image);
        j["referents"].push_back({{"index", i},
                                  {"class", r.class_id},
                                  {"superclass", r.superclass},
                                  {"instance_seed", r.instance_seed},
                                  {"split", split_name(r.split)},
                                  {"file", file}});
    }
    std::ofstream os(dir + "/manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write manifest in " + dir);
    os << j.dump(2) << "\n";
}

}  // namespace sketchgame
