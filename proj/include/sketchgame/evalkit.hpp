#pragma once

#include <array>
#include <string>
#include <vector>

#include "sketchgame/game.hpp"
#include "sketchgame/train.hpp"

namespace sketchgame {

struct EvalGamesResult {
    double success = 0.0;
    double avg_steps = 0.0;
    int episodes = 0;
};

/// Test-mode games over a split: every image of the split appears as the
/// target exactly `reps` times, contexts sampled per episode.
EvalGamesResult evaluate_games(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                               const ReferentSet& set, Split split, const GameSetting& setting,
                               int M, std::uint64_t seed, int reps = 1);

/// Forced-choice accuracy after exactly `k` drawing steps (wait until the
/// horizon, early decision disabled).
double forced_step_accuracy(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                            const ReferentSet& set, Split split, int M, int k, int episodes,
                            std::uint64_t seed);

struct CorpusEntry {
    Tensor canvas;     // final-step canvas
    int class_id = -1;
    int superclass = -1;
    bool success = false;
};

struct SketchCorpus {
    std::vector<CorpusEntry> entries;
    std::string setting;
};

/// Final canvases from test-mode games, `per_class` per class of the split.
SketchCorpus collect_corpus(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                            const ReferentSet& set, Split split, const GameSetting& setting, int M,
                            int per_class, std::uint64_t seed);

struct ProbeResult {
    double accuracy = 0.0;
    int classes_used = 0;
    int train_count = 0;
    int test_count = 0;
};

/// Linear head on frozen backbone features of the corpus canvases; stratified
/// 70/30 split, deterministic in (corpus, seed). Classes with fewer than 4
/// canvases are excluded with a warning on stderr.
ProbeResult symbolicity_probe(const SketchCorpus& corpus, const FeatureNet& features,
                              std::uint64_t seed);

/// Mean reciprocal rank of each canvas's own class-image centroid among all
/// class centroids by cosine similarity in feature space.
double iconicity_score(const SketchCorpus& corpus, const ReferentSet& set,
                       const FeatureNet& features);

struct TopoResult {
    double rho = 0.0;        // Spearman rank correlation
    double p_value = 1.0;    // one-sided permutation test
    bool degenerate = false; // all-equal distances
    double within_super = 0.0;
    double between_super = 0.0;
};

/// Topographic correlation between class-centroid distance matrices of the
/// referent images and the corpus sketches, plus within/between superclass
/// mean sketch-centroid distances.
TopoResult semanticity_topo(const SketchCorpus& corpus, const ReferentSet& set,
                            const FeatureNet& features, int permutations = 10000,
                            std::uint64_t seed = 97);

/// Top-2 principal components of corpus canvas embeddings; rows align with
/// corpus entries, sign fixed by the largest-magnitude loading.
std::vector<std::array<double, 2>> pca_projection(const SketchCorpus& corpus,
                                                  const FeatureNet& features);
void write_pca_csv(const std::string& path, const SketchCorpus& corpus,
                   const std::vector<std::array<double, 2>>& coords);

/// One panel per checkpoint, left to right, labeled by iteration: the strokes
/// of the final-step canvas for the probe referent's class. Missing
/// checkpoints are skipped with a warning.
void evolution_strip(const std::vector<std::string>& checkpoint_paths, const RunConfig& cfg,
                     const GameSetting& setting, const ReferentSet& set, int cls,
                     const std::string& out_svg);

// Spearman rank correlation of two equal-length vectors.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

struct EvalReport {
    std::string setting;
    std::vector<std::uint64_t> seeds;
    // indexed by split (seen / unseen-instance / unseen-class)
    double success_mean[3] = {0, 0, 0};
    double success_sd[3] = {0, 0, 0};
    double steps_mean[3] = {0, 0, 0};
    std::vector<int> probe_steps;            // {1,3,5,7}
    std::vector<double> stepwise_accuracy;   // seen split, mean over seeds
    double probe_accuracy = 0.0;
    double iconicity = 0.0;
    TopoResult topo;
};

void write_eval_report(const std::string& dir, const EvalReport& report);

}  // namespace sketchgame
