#include "sketchgame/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "sketchgame/errors.hpp"

namespace sketchgame {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Round with a fixed target referent; context target instance and distractor
// classes drawn from the same split.
RoundSample round_for_target(const ReferentSet& set, Split split, int sender_ref, int M, Rng& rng) {
    const Referent& sr = set.referents[static_cast<size_t>(sender_ref)];
    RoundSample r;
    r.sender_ref = sender_ref;
    std::vector<int> own = set.class_refs(split, sr.class_id);
    std::vector<int> pool;
    for (int i : own)
        if (i != sender_ref) pool.push_back(i);
    if (pool.empty()) pool = own;
    int ctx_target = pool[static_cast<size_t>(uniform_int(rng, static_cast<int>(pool.size())))];

    std::vector<int> classes = set.split_classes(split);
    std::vector<int> others;
    for (int c : classes)
        if (c != sr.class_id) others.push_back(c);
    for (int i = static_cast<int>(others.size()) - 1; i > 0; --i)
        std::swap(others[static_cast<size_t>(i)], others[static_cast<size_t>(uniform_int(rng, i + 1))]);

    r.target_index = uniform_int(rng, M);
    int di = 0;
    for (int j = 0; j < M; ++j) {
        if (j == r.target_index) {
            r.context_refs.push_back(ctx_target);
        } else {
            std::vector<int> crefs = set.class_refs(split, others[static_cast<size_t>(di++)]);
            r.context_refs.push_back(
                crefs[static_cast<size_t>(uniform_int(rng, static_cast<int>(crefs.size())))]);
        }
    }
    return r;
}

Tensor embed_canvas(const FeatureNet& features, const Tensor& canvas) {
    return features.embed_plain(canvas);
}

double cosine(const Tensor& a, const Tensor& b) {
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < a.size(); ++i) {
        dot += a.data[static_cast<size_t>(i)] * b.data[static_cast<size_t>(i)];
        na += a.data[static_cast<size_t>(i)] * a.data[static_cast<size_t>(i)];
        nb += b.data[static_cast<size_t>(i)] * b.data[static_cast<size_t>(i)];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0 ? dot / denom : 0.0;
}

double euclid(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (int i = 0; i < a.size(); ++i) {
        double d = a.data[static_cast<size_t>(i)] - b.data[static_cast<size_t>(i)];
        s += d * d;
    }
    return std::sqrt(s);
}

Tensor mean_of(const std::vector<Tensor>& xs) {
    Tensor out(xs.front().shape);
    for (const Tensor& x : xs)
        for (int i = 0; i < x.size(); ++i) out.data[static_cast<size_t>(i)] += x.data[static_cast<size_t>(i)];
    for (double& v : out.data) v /= static_cast<double>(xs.size());
    return out;
}

// f_R centroid of every instance image of each class.
std::map<int, Tensor> image_centroids(const ReferentSet& set, const FeatureNet& features) {
    std::map<int, std::vector<Tensor>> per_class;
    for (const Referent& r : set.referents)
        per_class[r.class_id].push_back(embed_canvas(features, r.image));
    std::map<int, Tensor> out;
    for (auto& [cls, xs] : per_class) out.emplace(cls, mean_of(xs));
    return out;
}

std::vector<double> rank_with_ties(const std::vector<double>& v) {
    size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> ra = rank_with_ties(a), rb = rank_with_ties(b);
    double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    double denom = std::sqrt(da * db);
    return denom > 0 ? num / denom : 0.0;
}

EvalGamesResult evaluate_games(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                               const ReferentSet& set, Split split, const GameSetting& setting,
                               int M, std::uint64_t seed, int reps) {
    const std::vector<int>& refs = set.split_refs(split);
    if (refs.empty()) throw ConfigError("evaluation split is empty");
    EvalGamesResult out;
    for (int ref : refs) {
        for (int rep = 0; rep < reps; ++rep) {
            Rng rng = make_rng(seed, static_cast<std::uint64_t>(ref), static_cast<std::uint64_t>(rep));
            RoundSample round = round_for_target(set, split, ref, M, rng);
            Tape tape;
            EpisodeTrace tr = play_episode(tape, sender, receiver, set, round, setting, rng, false);
            out.success += tr.success ? 1.0 : 0.0;
            out.avg_steps += tr.num_steps();
            ++out.episodes;
        }
    }
    out.success /= out.episodes;
    out.avg_steps /= out.episodes;
    return out;
}

double forced_step_accuracy(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                            const ReferentSet& set, Split split, int M, int k, int episodes,
                            std::uint64_t seed) {
    GameSetting g;
    g.name = "forced";
    g.early_decision = false;
    g.max_steps = k;
    BatchStats st = run_eval_batch(sender, receiver, set, split, g, M, episodes, seed);
    return st.success_rate;
}

SketchCorpus collect_corpus(const SenderPolicy& sender, const ReceiverPolicy& receiver,
                            const ReferentSet& set, Split split, const GameSetting& setting, int M,
                            int per_class, std::uint64_t seed) {
    SketchCorpus corpus;
    corpus.setting = setting.name;
    for (int cls : set.split_classes(split)) {
        std::vector<int> refs = set.class_refs(split, cls);
        for (int i = 0; i < per_class; ++i) {
            int ref = refs[static_cast<size_t>(i) % refs.size()];
            Rng rng = make_rng(seed, static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(i));
            RoundSample round = round_for_target(set, split, ref, M, rng);
            Tape tape;
            EpisodeTrace tr = play_episode(tape, sender, receiver, set, round, setting, rng, false);
            CorpusEntry e;
            e.canvas = tr.steps.back().canvas_after_val;
            e.class_id = cls;
            e.superclass = set.referents[static_cast<size_t>(ref)].superclass;
            e.success = tr.success;
            corpus.entries.push_back(std::move(e));
        }
    }
    return corpus;
}

ProbeResult symbolicity_probe(const SketchCorpus& corpus, const FeatureNet& features,
                              std::uint64_t seed) {
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < corpus.entries.size(); ++i)
        by_class[corpus.entries[i].class_id].push_back(i);

    std::vector<int> classes;
    for (auto& [cls, idxs] : by_class) {
        if (idxs.size() < 4) {
            std::cerr << "probe: class " << cls << " has " << idxs.size()
                      << " canvases, excluded\n";
            continue;
        }
        classes.push_back(cls);
    }
    if (classes.size() < 2) throw ConfigError("probe needs at least 2 usable classes");
    std::map<int, int> label;
    for (size_t i = 0; i < classes.size(); ++i) label[classes[i]] = static_cast<int>(i);

    std::vector<std::pair<Tensor, int>> train, test;
    for (int cls : classes) {
        std::vector<size_t> idxs = by_class[cls];
        Rng rng = make_rng(seed, 0x9b0eULL, static_cast<std::uint64_t>(cls));
        for (int i = static_cast<int>(idxs.size()) - 1; i > 0; --i)
            std::swap(idxs[static_cast<size_t>(i)], idxs[static_cast<size_t>(uniform_int(rng, i + 1))]);
        size_t n_train = (idxs.size() * 7 + 9) / 10;  // ceil(0.7 n)
        for (size_t i = 0; i < idxs.size(); ++i) {
            Tensor emb = embed_canvas(features, corpus.entries[idxs[i]].canvas);
            (i < n_train ? train : test).emplace_back(std::move(emb), label[cls]);
        }
    }

    int C = static_cast<int>(classes.size());
    int D = train.front().first.size();
    ParameterSet ps("probe");
    Rng init_rng = make_rng(seed, 0x9b0eULL);
    Dense head(ps, "head", D, C, init_rng);
    Adam adam;
    const int epochs = 300;
    for (int ep = 0; ep < epochs; ++ep) {
        ps.zero_grad();
        Tape tape;
        Var loss;
        for (auto& [x, y] : train) {
            Var p = tape.softmax(head.forward(tape, tape.constant(x)));
            Var nll = tape.scale(tape.log_(tape.pick(p, y)), -1.0);
            loss = loss.valid() ? tape.add(loss, nll) : nll;
        }
        tape.backward(loss);
        ps.scale_grad(1.0 / static_cast<double>(train.size()));
        adam.step(ps, 1e-2);
    }

    int correct = 0;
    for (auto& [x, y] : test) {
        Tape tape;
        Var logits = head.forward(tape, tape.constant(x));
        const Tensor& lv = tape.value(logits);
        int best = 0;
        for (int j = 1; j < C; ++j)
            if (lv.data[static_cast<size_t>(j)] > lv.data[static_cast<size_t>(best)]) best = j;
        if (best == y) ++correct;
    }
    ProbeResult out;
    out.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
    out.classes_used = C;
    out.train_count = static_cast<int>(train.size());
    out.test_count = static_cast<int>(test.size());
    return out;
}

double iconicity_score(const SketchCorpus& corpus, const ReferentSet& set,
                       const FeatureNet& features) {
    std::map<int, Tensor> centroids = image_centroids(set, features);
    double mrr = 0.0;
    for (const CorpusEntry& e : corpus.entries) {
        Tensor emb = embed_canvas(features, e.canvas);
        double own = cosine(emb, centroids.at(e.class_id));
        int rank = 1;
        for (auto& [cls, cen] : centroids)
            if (cls != e.class_id && cosine(emb, cen) > own) ++rank;
        mrr += 1.0 / static_cast<double>(rank);
    }
    return corpus.entries.empty() ? 0.0 : mrr / static_cast<double>(corpus.entries.size());
}

TopoResult semanticity_topo(const SketchCorpus& corpus, const ReferentSet& set,
                            const FeatureNet& features, int permutations, std::uint64_t seed) {
    std::map<int, std::vector<Tensor>> sketch_embs;
    std::map<int, int> superclass_of;
    for (const CorpusEntry& e : corpus.entries) {
        sketch_embs[e.class_id].push_back(embed_canvas(features, e.canvas));
        superclass_of[e.class_id] = e.superclass;
    }
    std::vector<int> classes;
    for (auto& [cls, xs] : sketch_embs) classes.push_back(cls);
    if (classes.size() < 5) throw ConfigError("topographic correlation needs >= 5 classes");
    size_t C = classes.size();

    std::map<int, Tensor> img_cen = image_centroids(set, features);
    std::vector<Tensor> sk_cen, im_cen;
    for (int cls : classes) {
        sk_cen.push_back(mean_of(sketch_embs[cls]));
        im_cen.push_back(img_cen.at(cls));
    }

    auto upper = [&](const std::vector<Tensor>& cen, const std::vector<size_t>& perm) {
        std::vector<double> v;
        for (size_t i = 0; i < C; ++i)
            for (size_t j = i + 1; j < C; ++j) v.push_back(euclid(cen[perm[i]], cen[perm[j]]));
        return v;
    };
    std::vector<size_t> ident(C);
    std::iota(ident.begin(), ident.end(), size_t{0});
    std::vector<double> dim = upper(im_cen, ident);
    std::vector<double> dsk = upper(sk_cen, ident);

    TopoResult out;
    auto all_equal = [](const std::vector<double>& v) {
        for (double x : v)
            if (x != v.front()) return false;
        return true;
    };
    if (all_equal(dim) || all_equal(dsk)) {
        out.degenerate = true;
        return out;
    }
    out.rho = spearman_rho(dim, dsk);

    Rng rng = make_rng(seed, 0x70b0ULL);
    int ge = 0;
    std::vector<size_t> perm = ident;
    for (int p = 0; p < permutations; ++p) {
        for (int i = static_cast<int>(C) - 1; i > 0; --i)
            std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(uniform_int(rng, i + 1))]);
        double r = spearman_rho(dim, upper(sk_cen, perm));
        if (r >= out.rho) ++ge;
    }
    out.p_value = (1.0 + ge) / (1.0 + permutations);

    double wsum = 0, bsum = 0;
    int wn = 0, bn = 0;
    for (size_t i = 0; i < C; ++i)
        for (size_t j = i + 1; j < C; ++j) {
            double d = euclid(sk_cen[i], sk_cen[j]);
            if (superclass_of[classes[i]] == superclass_of[classes[j]]) {
                wsum += d;
                ++wn;
            } else {
                bsum += d;
                ++bn;
            }
        }
    out.within_super = wn > 0 ? wsum / wn : 0.0;
    out.between_super = bn > 0 ? bsum / bn : 0.0;
    return out;
}

namespace {

// Jacobi eigensolver for small symmetric matrices; eigenpairs sorted by
// descending eigenvalue.
void jacobi_eigen(std::vector<double>& A, int n, std::vector<double>& evals,
                  std::vector<double>& evecs) {
    evecs.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) evecs[static_cast<size_t>(i) * n + i] = 1.0;
    auto at = [&](std::vector<double>& M, int r, int c) -> double& {
        return M[static_cast<size_t>(r) * n + c];
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(A, p, q) * at(A, p, q);
        if (off < 1e-22) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                double apq = at(A, p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (at(A, q, q) - at(A, p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = at(A, k, p), akq = at(A, k, q);
                    at(A, k, p) = c * akp - s * akq;
                    at(A, k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = at(A, p, k), aqk = at(A, q, k);
                    at(A, p, k) = c * apk - s * aqk;
                    at(A, q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = at(evecs, k, p), vkq = at(evecs, k, q);
                    at(evecs, k, p) = c * vkp - s * vkq;
                    at(evecs, k, q) = s * vkp + c * vkq;
                }
            }
    }
    evals.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) evals[static_cast<size_t>(i)] = at(A, i, i);
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return evals[static_cast<size_t>(a)] > evals[static_cast<size_t>(b)]; });
    std::vector<double> ev2(evals.size()), vec2(evecs.size());
    for (int i = 0; i < n; ++i) {
        ev2[static_cast<size_t>(i)] = evals[static_cast<size_t>(order[static_cast<size_t>(i)])];
        for (int k = 0; k < n; ++k)
            vec2[static_cast<size_t>(k) * n + i] = at(evecs, k, order[static_cast<size_t>(i)]);
    }
    evals = std::move(ev2);
    evecs = std::move(vec2);
}

}  // namespace

std::vector<std::array<double, 2>> pca_projection(const SketchCorpus& corpus,
                                                  const FeatureNet& features) {
    if (corpus.entries.empty()) throw ConfigError("pca: empty corpus");
    size_t N = corpus.entries.size();
    std::vector<Tensor> embs;
    for (const CorpusEntry& e : corpus.entries) embs.push_back(embed_canvas(features, e.canvas));
    int D = embs.front().size();
    std::vector<double> mean(static_cast<size_t>(D), 0.0);
    for (const Tensor& e : embs)
        for (int d = 0; d < D; ++d) mean[static_cast<size_t>(d)] += e.data[static_cast<size_t>(d)];
    for (double& m : mean) m /= static_cast<double>(N);
    // centered rows
    std::vector<std::vector<double>> X(N, std::vector<double>(static_cast<size_t>(D)));
    for (size_t i = 0; i < N; ++i)
        for (int d = 0; d < D; ++d)
            X[i][static_cast<size_t>(d)] = embs[i].data[static_cast<size_t>(d)] - mean[static_cast<size_t>(d)];

    std::vector<std::array<double, 2>> coords(N, {0.0, 0.0});
    if (N == 1) return coords;

    // Gram trick when N < D: eigvecs of X X^T map to directions X^T v.
    std::vector<std::array<double, 2>> pcs;  // two D-dim directions
    std::vector<double> dir1(static_cast<size_t>(D), 0.0), dir2(static_cast<size_t>(D), 0.0);
    if (static_cast<int>(N) < D) {
        std::vector<double> G(N * N, 0.0);
        for (size_t i = 0; i < N; ++i)
            for (size_t j = i; j < N; ++j) {
                double s = 0;
                for (int d = 0; d < D; ++d) s += X[i][static_cast<size_t>(d)] * X[j][static_cast<size_t>(d)];
                G[i * N + j] = G[j * N + i] = s;
            }
        std::vector<double> evals, evecs;
        jacobi_eigen(G, static_cast<int>(N), evals, evecs);
        for (int pc = 0; pc < 2; ++pc) {
            std::vector<double>& dir = pc == 0 ? dir1 : dir2;
            if (evals[static_cast<size_t>(pc)] <= 1e-18) continue;
            for (size_t i = 0; i < N; ++i)
                for (int d = 0; d < D; ++d)
                    dir[static_cast<size_t>(d)] +=
                        evecs[i * N + static_cast<size_t>(pc)] * X[i][static_cast<size_t>(d)];
            double norm = 0;
            for (double v : dir) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0)
                for (double& v : dir) v /= norm;
        }
    } else {
        std::vector<double> C(static_cast<size_t>(D) * D, 0.0);
        for (size_t i = 0; i < N; ++i)
            for (int a = 0; a < D; ++a)
                for (int b = a; b < D; ++b)
                    C[static_cast<size_t>(a) * D + b] += X[i][static_cast<size_t>(a)] * X[i][static_cast<size_t>(b)];
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < a; ++b)
                C[static_cast<size_t>(a) * D + b] = C[static_cast<size_t>(b) * D + a];
        std::vector<double> evals, evecs;
        jacobi_eigen(C, D, evals, evecs);
        for (int d = 0; d < D; ++d) {
            dir1[static_cast<size_t>(d)] = evecs[static_cast<size_t>(d) * D + 0];
            dir2[static_cast<size_t>(d)] = evecs[static_cast<size_t>(d) * D + 1];
        }
    }
    // sign convention: largest-magnitude loading positive
    for (std::vector<double>* dir : {&dir1, &dir2}) {
        int arg = 0;
        for (int d = 1; d < D; ++d)
            if (std::abs((*dir)[static_cast<size_t>(d)]) > std::abs((*dir)[static_cast<size_t>(arg)])) arg = d;
        if ((*dir)[static_cast<size_t>(arg)] < 0)
            for (double& v : *dir) v = -v;
    }
    for (size_t i = 0; i < N; ++i) {
        double c0 = 0, c1 = 0;
        for (int d = 0; d < D; ++d) {
            c0 += X[i][static_cast<size_t>(d)] * dir1[static_cast<size_t>(d)];
            c1 += X[i][static_cast<size_t>(d)] * dir2[static_cast<size_t>(d)];
        }
        coords[i] = {c0, c1};
    }
    return coords;
}

void write_pca_csv(const std::string& path, const SketchCorpus& corpus,
                   const std::vector<std::array<double, 2>>& coords) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "index,class,superclass,pc1,pc2\n";
    for (size_t i = 0; i < coords.size(); ++i)
        os << i << ',' << corpus.entries[i].class_id << ',' << corpus.entries[i].superclass << ','
           << coords[i][0] << ',' << coords[i][1] << '\n';
}

void evolution_strip(const std::vector<std::string>& checkpoint_paths, const RunConfig& cfg,
                     const GameSetting& setting, const ReferentSet& set, int cls,
                     const std::string& out_svg) {
    struct Panel {
        int iteration;
        std::vector<StrokeBundle> strokes;
    };
    std::vector<Panel> panels;
    for (const std::string& path : checkpoint_paths) {
        if (!fs::exists(path)) {
            std::cerr << "strip: missing checkpoint " << path << ", skipped\n";
            continue;
        }
        Agents a = make_agents(cfg, cfg.train_classes, 0);
        int iteration = load_checkpoint(path, a);
        a.receiver->refresh_reference_embeddings(set);
        RoundSample round = probe_round(set, cls, cfg.context_size);
        Panel p;
        p.iteration = iteration;
        p.strokes = greedy_episode_strokes(*a.sender, *a.receiver, set, round, setting);
        panels.push_back(std::move(p));
    }
    if (panels.size() < 2) throw ConfigError("evolution strip needs >= 2 checkpoints");

    std::ofstream os(out_svg);
    if (!os) throw IoError("cannot write " + out_svg);
    double sw = 2.0 * set.config.raster.sigma / set.config.raster.width;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << panels.size()
       << " 1.15\">\n";
    for (size_t i = 0; i < panels.size(); ++i) {
        os << "<g transform=\"translate(" << i << ",0)\">\n";
        os << "<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\" stroke=\"#888\" "
              "stroke-width=\"0.005\"/>\n";
        for (const StrokeBundle& b : panels[i].strokes)
            for (const Stroke& s : b)
                os << "<path d=\"M " << s.x0 << ' ' << s.y0 << " Q " << s.x1 << ' ' << s.y1 << ' '
                   << s.x2 << ' ' << s.y2 << "\" fill=\"none\" stroke=\"black\" stroke-width=\""
                   << sw << "\" stroke-linecap=\"round\"/>\n";
        os << "<text x=\"0.05\" y=\"1.1\" font-size=\"0.09\">" << panels[i].iteration
           << "</text>\n</g>\n";
    }
    os << "</svg>\n";
}

void write_eval_report(const std::string& dir, const EvalReport& report) {
    fs::create_directories(dir);
    json j;
    j["setting"] = report.setting;
    j["seeds"] = report.seeds;
    const char* split_keys[3] = {"seen", "unseen_instance", "unseen_class"};
    for (int s = 0; s < 3; ++s) {
        j[split_keys[s]]["success_mean"] = report.success_mean[s];
        j[split_keys[s]]["success_sd"] = report.success_sd[s];
        j[split_keys[s]]["avg_steps"] = report.steps_mean[s];
    }
    j["probe_steps"] = report.probe_steps;
    j["stepwise_accuracy"] = report.stepwise_accuracy;
    j["probe_accuracy"] = report.probe_accuracy;
    j["iconicity_mrr"] = report.iconicity;
    j["topo_rho"] = report.topo.rho;
    j["topo_p"] = report.topo.p_value;
    j["topo_degenerate"] = report.topo.degenerate;
    j["topo_within_super"] = report.topo.within_super;
    j["topo_between_super"] = report.topo.between_super;
    std::ofstream os(dir + "/report.json");
    if (!os) throw IoError("cannot write report into " + dir);
    os << j.dump(2) << "\n";

    std::ofstream cs(dir + "/stepwise.csv");
    cs << "step,accuracy\n";
    for (size_t i = 0; i < report.probe_steps.size(); ++i)
        cs << report.probe_steps[i] << ',' << report.stepwise_accuracy[i] << '\n';
}

}  // namespace sketchgame
