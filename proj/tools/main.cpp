#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sketchgame/errors.hpp"
#include "sketchgame/evalkit.hpp"

namespace fs = std::filesystem;
using namespace sketchgame;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string setting;
    std::vector<int> seeds;
    long seed = -1;
    int workers = 0;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "JSON run configuration");
    cmd->add_option("--out", a.out_dir, "output directory (overrides config)");
    cmd->add_option("--setting", a.setting, "game setting name");
    cmd->add_option("--seed", a.seed, "single master seed");
    cmd->add_option("--seeds", a.seeds, "list of master seeds")->delimiter(',');
    cmd->add_option("--workers", a.workers, "episode rollout workers");
    cmd->add_flag("--force", a.force, "overwrite existing outputs");
}

RunConfig resolve_config(const CommonArgs& a) {
    RunConfig cfg = a.config_path.empty() ? RunConfig{} : load_run_config(a.config_path);
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (!a.setting.empty()) cfg.setting = a.setting;
    if (a.seed >= 0) cfg.seeds = {static_cast<int>(a.seed)};
    if (!a.seeds.empty()) cfg.seeds = a.seeds;
    if (a.workers > 0) cfg.workers = a.workers;
    GameSetting::by_name(cfg.setting, cfg.max_steps);  // validates
    return cfg;
}

std::string run_dir_for(const RunConfig& cfg, int seed) {
    return cfg.out_dir + "/" + cfg.setting + "_seed" + std::to_string(seed);
}

void save_net(const std::string& path, const ParameterSet& ps, const std::string& component) {
    TensorMap map;
    pack_parameter_set(ps, map);
    json meta;
    meta["schema"] = 1;
    meta["component"] = component;
    save_tensor_map(path, meta.dump(), map);
}

void load_net(const std::string& path, ParameterSet& ps) {
    if (!fs::exists(path)) throw ConfigError("missing checkpoint: " + path);
    std::string meta;
    TensorMap map = load_tensor_map(path, &meta);
    unpack_parameter_set(ps, map);
}

void write_curve_csv(const std::string& path, const std::vector<double>& curve) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "iteration,loss\n";
    for (size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i] << '\n';
}

int cmd_gen_data(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    std::string dir = cfg.out_dir + "/dataset";
    if (fs::exists(dir) && !fs::is_empty(dir) && !a.force)
        throw ConfigError("dataset directory exists and is not empty (use --force): " + dir);
    fs::create_directories(dir);
    echo_run_config(cfg, cfg.out_dir);
    ReferentSet set = build_referent_set(cfg.referent_config());
    export_referent_set(set, dir);
    std::cout << "wrote " << set.referents.size() << " referents to " << dir << "\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& a, const std::string& component) {
    RunConfig cfg = resolve_config(a);
    std::string dir = cfg.out_dir + "/pretrain";
    fs::create_directories(dir);
    echo_run_config(cfg, cfg.out_dir);
    ReferentSet set = build_referent_set(cfg.referent_config());
    int seed = cfg.seeds.front();
    Agents agents = make_agents(cfg, cfg.train_classes, static_cast<std::uint64_t>(seed));
    if (component == "receiver-features") {
        FeaturePretrainOptions opts;
        opts.seed = hash_mix(static_cast<std::uint64_t>(seed), 0xf0abULL);
        FeaturePretrainReport rep = pretrain_receiver_features(*agents.features, set, opts);
        save_net(dir + "/features.ckpt", agents.features->params(), "features");
        write_curve_csv(dir + "/features_loss.csv", rep.loss_curve);
        std::cout << "receiver features: val accuracy " << rep.val_accuracy << " after "
                  << rep.iterations << " iterations\n";
    } else if (component == "sender") {
        SenderPretrainOptions opts;
        opts.seed = hash_mix(static_cast<std::uint64_t>(seed), 0x5eabULL);
        SenderPretrainReport rep = pretrain_sender(*agents.sender, set, set.config.raster, opts);
        save_net(dir + "/sender.ckpt", agents.sender->params(), "sender");
        write_curve_csv(dir + "/sender_loss.csv", rep.loss_curve);
        std::cout << "sender copy loss " << rep.initial_loss << " -> " << rep.final_loss
                  << " (IoU " << rep.mean_iou << ")\n";
    } else {
        throw ConfigError("unknown pretrain component: " + component);
    }
    return 0;
}

Agents load_pretrained_agents(const RunConfig& cfg, int seed) {
    Agents agents = make_agents(cfg, cfg.train_classes, static_cast<std::uint64_t>(seed));
    std::string dir = cfg.out_dir + "/pretrain";
    load_net(dir + "/features.ckpt", agents.features->params());
    load_net(dir + "/sender.ckpt", agents.sender->params());
    return agents;
}

int cmd_train(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    echo_run_config(cfg, cfg.out_dir);
    ReferentSet set = build_referent_set(cfg.referent_config());
    GameSetting setting = GameSetting::by_name(cfg.setting, cfg.max_steps);
    for (int seed : cfg.seeds) {
        Agents agents = load_pretrained_agents(cfg, seed);
        std::string dir = run_dir_for(cfg, seed);
        TrainResult res = train_run(cfg, setting, static_cast<std::uint64_t>(seed), set, agents, dir);
        std::cout << cfg.setting << " seed " << seed << ": "
                  << (res.validation.empty() ? 0.0 : res.validation.back().success)
                  << " final validation success, checkpoint " << res.final_checkpoint << "\n";
    }
    return 0;
}

std::string final_checkpoint(const RunConfig& cfg, int seed) {
    return run_dir_for(cfg, seed) + "/" + cfg.setting + "_" + std::to_string(seed) + "_" +
           std::to_string(cfg.iterations) + ".ckpt";
}

Agents load_trained(const RunConfig& cfg, int seed, const ReferentSet& set) {
    Agents agents = make_agents(cfg, cfg.train_classes, static_cast<std::uint64_t>(seed));
    std::string path = final_checkpoint(cfg, seed);
    if (!fs::exists(path)) throw ConfigError("missing trained checkpoint: " + path);
    load_checkpoint(path, agents);
    agents.receiver->refresh_reference_embeddings(set);
    return agents;
}

int cmd_eval(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    ReferentSet set = build_referent_set(cfg.referent_config());
    GameSetting setting = GameSetting::by_name(cfg.setting, cfg.max_steps);

    EvalReport report;
    report.setting = cfg.setting;
    report.probe_steps = {1, 3, 5, 7};
    report.stepwise_accuracy.assign(report.probe_steps.size(), 0.0);
    std::vector<double> succ[3];
    double steps_acc[3] = {0, 0, 0};
    double probe_sum = 0, icon_sum = 0;
    TopoResult topo_last;

    for (int seed : cfg.seeds) {
        report.seeds.push_back(static_cast<std::uint64_t>(seed));
        Agents agents = load_trained(cfg, seed, set);
        for (int s = 0; s < 3; ++s) {
            Split split = static_cast<Split>(s);
            if (set.split_refs(split).empty()) continue;
            EvalGamesResult r = evaluate_games(*agents.sender, *agents.receiver, set, split,
                                               setting, cfg.context_size,
                                               hash_mix(static_cast<std::uint64_t>(seed), 0xe7a1ULL));
            succ[s].push_back(r.success);
            steps_acc[s] += r.success >= 0 ? r.avg_steps : 0;
        }
        for (size_t i = 0; i < report.probe_steps.size(); ++i)
            report.stepwise_accuracy[i] += forced_step_accuracy(
                *agents.sender, *agents.receiver, set, Split::Train, cfg.context_size,
                report.probe_steps[i], 120, hash_mix(static_cast<std::uint64_t>(seed), 0x57e9ULL));
        SketchCorpus corpus =
            collect_corpus(*agents.sender, *agents.receiver, set, Split::Train, setting,
                           cfg.context_size, 10, hash_mix(static_cast<std::uint64_t>(seed), 0xc09bULL));
        probe_sum += symbolicity_probe(corpus, *agents.features, 31).accuracy;
        icon_sum += iconicity_score(corpus, set, *agents.features);
        topo_last = semanticity_topo(corpus, set, *agents.features);
    }
    double n = static_cast<double>(cfg.seeds.size());
    for (int s = 0; s < 3; ++s) {
        if (succ[s].empty()) continue;
        double m = 0;
        for (double v : succ[s]) m += v;
        m /= succ[s].size();
        double var = 0;
        for (double v : succ[s]) var += (v - m) * (v - m);
        report.success_mean[s] = m;
        report.success_sd[s] = succ[s].size() > 1 ? std::sqrt(var / (succ[s].size() - 1)) : 0.0;
        report.steps_mean[s] = steps_acc[s] / succ[s].size();
    }
    for (double& v : report.stepwise_accuracy) v /= n;
    report.probe_accuracy = probe_sum / n;
    report.iconicity = icon_sum / n;
    report.topo = topo_last;

    std::string dir = cfg.out_dir + "/" + cfg.setting + "_eval";
    write_eval_report(dir, report);
    std::cout << "eval report written to " << dir << "\n";
    return 0;
}

int cmd_probe(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    ReferentSet set = build_referent_set(cfg.referent_config());
    GameSetting setting = GameSetting::by_name(cfg.setting, cfg.max_steps);
    json out;
    for (int seed : cfg.seeds) {
        Agents agents = load_trained(cfg, seed, set);
        SketchCorpus corpus =
            collect_corpus(*agents.sender, *agents.receiver, set, Split::Train, setting,
                           cfg.context_size, 10, hash_mix(static_cast<std::uint64_t>(seed), 0xc09bULL));
        ProbeResult r = symbolicity_probe(corpus, *agents.features, 31);
        out[std::to_string(seed)] = {{"accuracy", r.accuracy},
                                     {"classes", r.classes_used},
                                     {"train", r.train_count},
                                     {"test", r.test_count}};
        std::cout << "seed " << seed << " probe accuracy " << r.accuracy << "\n";
    }
    std::ofstream os(cfg.out_dir + "/" + cfg.setting + "_probe.json");
    os << out.dump(2) << "\n";
    return 0;
}

int cmd_project(const CommonArgs& a) {
    RunConfig cfg = resolve_config(a);
    ReferentSet set = build_referent_set(cfg.referent_config());
    GameSetting setting = GameSetting::by_name(cfg.setting, cfg.max_steps);
    int seed = cfg.seeds.front();
    Agents agents = load_trained(cfg, seed, set);
    SketchCorpus corpus =
        collect_corpus(*agents.sender, *agents.receiver, set, Split::Train, setting,
                       cfg.context_size, 10, hash_mix(static_cast<std::uint64_t>(seed), 0xc09bULL));
    auto coords = pca_projection(corpus, *agents.features);
    std::string path = cfg.out_dir + "/" + cfg.setting + "_pca.csv";
    write_pca_csv(path, corpus, coords);
    std::cout << "projection written to " << path << "\n";
    return 0;
}

int cmd_strip(const CommonArgs& a, int cls) {
    RunConfig cfg = resolve_config(a);
    ReferentSet set = build_referent_set(cfg.referent_config());
    GameSetting setting = GameSetting::by_name(cfg.setting, cfg.max_steps);
    int seed = cfg.seeds.front();
    std::string dir = run_dir_for(cfg, seed);
    std::vector<std::pair<int, std::string>> found;
    if (fs::exists(dir))
        for (const auto& entry : fs::directory_iterator(dir)) {
            std::string name = entry.path().filename().string();
            if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt") {
                size_t us = name.find_last_of('_');
                int iter = std::stoi(name.substr(us + 1, name.size() - us - 6));
                found.emplace_back(iter, entry.path().string());
            }
        }
    std::sort(found.begin(), found.end());
    std::vector<std::string> paths;
    for (auto& [it, p] : found) paths.push_back(p);
    std::string out = cfg.out_dir + "/" + cfg.setting + "_strip_class" + std::to_string(cls) + ".svg";
    evolution_strip(paths, cfg, setting, set, cls, out);
    std::cout << "strip written to " << out << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& eval_dirs, const std::string& out_dir) {
    if (eval_dirs.empty()) throw ConfigError("report needs at least one eval directory");
    std::vector<json> rows;
    for (const std::string& dir : eval_dirs) {
        std::ifstream is(dir + "/report.json");
        if (!is) throw ConfigError("incomplete run (missing report.json): " + dir);
        json j;
        is >> j;
        rows.push_back(j);
    }
    fs::create_directories(out_dir);
    std::ofstream cs(out_dir + "/summary.csv");
    std::ofstream md(out_dir + "/summary.md");
    const char* cols[3] = {"seen", "unseen_instance", "unseen_class"};
    cs << "setting,seen,seen_sd,seen_steps,unseen_instance,unseen_instance_sd,unseen_instance_"
          "steps,unseen_class,unseen_class_sd,unseen_class_steps\n";
    md << "| setting | seen | unseen instance | unseen class |\n|---|---|---|---|\n";
    for (const json& j : rows) {
        cs << j["setting"].get<std::string>();
        md << "| " << j["setting"].get<std::string>();
        for (const char* c : cols) {
            double m = j[c]["success_mean"].get<double>();
            double sd = j[c]["success_sd"].get<double>();
            double st = j[c]["avg_steps"].get<double>();
            cs << ',' << m << ',' << sd << ',' << st;
            char buf[96];
            std::snprintf(buf, sizeof(buf), " | %.2f ± %.2f (%.2f)", 100.0 * m, 100.0 * sd, st);
            md << buf;
        }
        cs << '\n';
        md << " |\n";
    }
    std::cout << "summary written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual communication game experiments"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string component = "receiver-features";
    int strip_class = 0;
    std::vector<std::string> report_dirs;
    std::string report_out = "report";

    CLI::App* gen = app.add_subcommand("gen-data", "generate the referent dataset");
    add_common(gen, args);
    CLI::App* pre = app.add_subcommand("pretrain", "pretrain a component");
    add_common(pre, args);
    pre->add_option("--component", component, "sender | receiver-features");
    CLI::App* train = app.add_subcommand("train", "run the game training loop");
    add_common(train, args);
    CLI::App* eval = app.add_subcommand("eval", "evaluate trained checkpoints");
    add_common(eval, args);
    CLI::App* probe = app.add_subcommand("probe", "linear probe on evolved sketches");
    add_common(probe, args);
    CLI::App* project = app.add_subcommand("project", "2D projection of sketch embeddings");
    add_common(project, args);
    CLI::App* strip = app.add_subcommand("strip", "evolution strip SVG");
    add_common(strip, args);
    strip->add_option("--class", strip_class, "class id for the strip");
    CLI::App* report = app.add_subcommand("report", "consolidated results table");
    report->add_option("dirs", report_dirs, "eval report directories");
    report->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(args);
        if (pre->parsed()) return cmd_pretrain(args, component);
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args);
        if (probe->parsed()) return cmd_probe(args);
        if (project->parsed()) return cmd_project(args);
        if (strip->parsed()) return cmd_strip(args, strip_class);
        if (report->parsed()) return cmd_report(report_dirs, report_out);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ConfigError::exit_code;
    } catch (const GateError& e) {
        std::cerr << "gate failure: " << e.what() << "\n";
        return GateError::exit_code;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return NumericalError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
