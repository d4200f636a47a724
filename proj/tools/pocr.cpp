#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pocr/adapter.hpp"
#include "pocr/experiment.hpp"
#include "pocr/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pocr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flags shared by every subcommand; each one set on the command line
// replaces the matching config key.
struct Overrides {
    std::optional<std::string> task, where, what, overlay, profile, segmenter, dataset, adapter_url, matcher;
    std::optional<uint64_t> seed;
    std::vector<uint64_t> seeds;
    std::optional<int> demos, episodes, k, steps, batch_size, distractors, jitter, injected;
    std::optional<double> lr, drop_prob, split_prob, tau_match;
    bool no_screening = false, flat = false, no_tau_match = false;

    void attach(CLI::App* app) {
        app->add_option("--task", task, "task name");
        app->add_option("--seed", seed, "single seed (replaces seeds)");
        app->add_option("--seeds", seeds, "seed list")->delimiter(',');
        app->add_option("--demos", demos, "demonstration count");
        app->add_option("--episodes", episodes, "evaluation rollouts per seed");
        app->add_option("--distractors", distractors, "distractor objects per scene");
        app->add_option("--k", k, "slot count");
        app->add_option("--where", where, "bbox | centroid | none");
        app->add_option("--what", what, "color_hist | grad_orient | patch | remote");
        app->add_option("--matcher", matcher, "crop | color_hist | grad_orient | patch");
        app->add_option("--overlay", overlay, "none | new_distractor | new_background");
        app->add_option("--profile", profile, "sim | real");
        app->add_option("--steps", steps, "gradient steps");
        app->add_option("--batch-size", batch_size, "batch size");
        app->add_option("--lr", lr, "learning rate");
        app->add_option("--segmenter", segmenter, "oracle | noisy");
        app->add_option("--drop-prob", drop_prob, "noisy segmenter drop probability");
        app->add_option("--split-prob", split_prob, "noisy segmenter split probability");
        app->add_option("--jitter", jitter, "noisy segmenter boundary jitter (px)");
        app->add_option("--inject-background", injected, "background proposals injected per frame");
        app->add_option("--tau-match", tau_match, "match rejection threshold");
        app->add_flag("--no-tau-match", no_tau_match, "disable match rejection");
        app->add_flag("--no-screening", no_screening, "disable foreground screening");
        app->add_flag("--flat", flat, "flat-descriptor baseline");
        app->add_option("--dataset", dataset, "dataset directory");
        app->add_option("--adapter-url", adapter_url, "adapter service url");
    }

    void apply(json& j) const {
        auto set = [&](const char* key, const auto& v) {
            if (v) j[key] = *v;
        };
        set("task", task);
        set("where", where);
        set("what", what);
        set("matcher", matcher);
        set("overlay", overlay);
        set("profile", profile);
        set("dataset", dataset);
        set("adapter_url", adapter_url);
        set("demos", demos);
        set("eval_episodes", episodes);
        set("distractors", distractors);
        set("k", k);
        set("gradient_steps", steps);
        set("batch_size", batch_size);
        set("lr", lr);
        set("tau_match", tau_match);
        if (no_tau_match) j["tau_match"] = nullptr;
        if (seed) j["seeds"] = json::array({*seed});
        if (!seeds.empty()) j["seeds"] = seeds;
        if (no_screening) j["screening"] = false;
        if (flat) {
            j["flat"] = true;
            if (!what) j["what"] = "patch";
        }
        json seg = j.contains("segmenter") ? j["segmenter"] : json::object();
        if (segmenter) seg["kind"] = *segmenter;
        if (drop_prob) seg["drop_prob"] = *drop_prob;
        if (split_prob) seg["split_prob"] = *split_prob;
        if (jitter) seg["jitter"] = *jitter;
        if (injected) seg["injected_background"] = *injected;
        if (!seg.empty()) j["segmenter"] = seg;
    }
};

struct Globals {
    std::string config_path;
    std::string output_dir;
};

RunConfig load_config(const Globals& g, const Overrides& o) {
    json j = json::object();
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) throw ConfigError("cannot read config file " + g.config_path);
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
    }
    o.apply(j);
    if (!g.output_dir.empty()) j["output_dir"] = g.output_dir;
    RunConfig c = run_config_from_json(j);
    if (c.output_dir.empty()) {
        const char* env = std::getenv("POCR_OUTPUT_DIR");
        c.output_dir = env && *env ? env : "pocr_out";
    }
    if (c.dataset.empty()) c.dataset = (fs::path(c.output_dir) / "dataset").string();
    return c;
}

fs::path ensure_dir(const fs::path& p) {
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << s;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<Demonstration> load_demos(const RunConfig& c) {
    if (!fs::exists(fs::path(c.dataset) / "manifest.json"))
        throw std::runtime_error("dataset not found: " + c.dataset + " (run gen-demos first)");
    DatasetInfo info;
    auto demos = load_dataset(c.dataset, &info);
    if (info.task != c.task) throw ConfigError("dataset task " + info.task + " differs from config task " + c.task);
    return demos;
}

// Remote descriptors live as long as the command.
struct ProviderHandle {
    std::unique_ptr<AdapterClient> client;
    std::unique_ptr<RemoteProvider> provider;
    const DescriptorProvider* get() const { return provider.get(); }
};

ProviderHandle open_provider(const RunConfig& c) {
    ProviderHandle h;
    if (c.pipeline.provider != ProviderKind::remote) return h;
    h.client = std::make_unique<AdapterClient>(c.adapter_url);
    h.client->handshake();
    h.provider = std::make_unique<RemoteProvider>(*h.client, EmbedRole::slot);
    return h;
}

int cmd_gen_demos(const RunConfig& c) {
    const auto task = task_spec(c, sim::Overlay::none);
    const uint64_t seed = c.seeds.front();
    const auto demos = sim::generate_demos(task, c.demos, seed);
    save_dataset(c.dataset, demos, {task.name, task.width, task.height, 3});
    int successes = 0;
    for (const auto& d : demos) successes += d.metadata.success;
    std::vector<Image> frames;
    for (const auto& st : demos.front().steps) frames.push_back(st.observation);
    write_png((fs::path(c.dataset) / "episode_0000_sheet.png").string(), sim::contact_sheet(frames));
    std::cout << json{{"dataset", c.dataset}, {"episodes", demos.size()}, {"seed", seed}, {"successful", successes}}.dump() << '\n';
    return 0;
}

fs::path checkpoint_path(const RunConfig& c, uint64_t seed) {
    return fs::path(c.output_dir) / "train" / ("seed_" + std::to_string(seed)) / "policy.ckpt";
}

int cmd_train(const RunConfig& c) {
    const auto demos = load_demos(c);
    auto provider = open_provider(c);
    json summary = {{"config", to_json(c)}, {"runs", json::array()}};
    std::vector<LineSeries> curves;
    for (uint64_t seed : c.seeds) {
        const auto dir = ensure_dir(checkpoint_path(c, seed).parent_path());
        auto trained = train_policy(c, demos, seed, provider.get());
        save_checkpoint((dir / "policy.ckpt").string(), trained.net, {{"pipeline", trained.pipeline.state()}, {"run_config", to_json(c)}, {"seed", seed}});
        write_loss_csv((dir / "loss.csv").string(), trained.loss_curve);
        LineSeries s;
        for (const auto& [step, loss] : trained.loss_curve) s.x.push_back(step), s.y.push_back(std::log10(std::max(loss, 1e-8)));
        curves.push_back(s);
        const double final_loss = trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back().second;
        summary["runs"].push_back({{"seed", seed}, {"checkpoint", (dir / "policy.ckpt").string()}, {"final_loss", final_loss},
                                   {"slot_width", trained.net.layout().slot_width()}, {"parameters", trained.net.parameter_count()}});
        std::cerr << "seed " << seed << " final loss " << fmt(final_loss) << '\n';
    }
    const auto root = fs::path(c.output_dir) / "train";
    write_json(root / "summary.json", summary);
    PlotOptions po;
    po.y_min = -6.0;
    po.y_max = 0.0;
    write_png((root / "loss_log10.png").string(), render_line_chart(curves, po));
    std::cout << summary["runs"].dump() << '\n';
    return 0;
}

PolicyLayout expected_layout(const RunConfig& c, const DescriptorProvider* remote) {
    const int d = remote ? remote->dimension() : make_builtin_provider(c.pipeline.provider)->dimension();
    if (c.pipeline.flat) return {1, d, WhereVariant::none, 3};
    return {c.pipeline.k, d, c.pipeline.where, 3};
}

struct EvalArgs {
    std::vector<std::string> checkpoints;
    bool expert = false;
};

int cmd_eval(const RunConfig& c, const EvalArgs& a) {
    std::vector<sim::Overlay> overlays = {sim::Overlay::none};
    if (c.overlay != sim::Overlay::none) overlays.push_back(c.overlay);
    json report = {{"overlays", json::array()}, {"runs", json::array()}};
    std::vector<std::vector<double>> rates(overlays.size());
    if (a.expert) {
        for (uint64_t seed : c.seeds)
            for (size_t i = 0; i < overlays.size(); ++i) {
                const auto task = task_spec(c, overlays[i]);
                auto policy = [&task](const sim::Scene& s, const sim::Observation&, uint64_t) { return sim::expert_action(s, task); };
                const auto r = sim::evaluate_policy(policy, task, c.eval_episodes, seed);
                rates[i].push_back(r.success_rate);
                report["runs"].push_back({{"seed", seed}, {"overlay", sim::to_string(overlays[i])}, {"policy", "expert"}, {"success", r.success_rate}});
            }
    } else {
        auto provider = open_provider(c);
        std::vector<std::pair<uint64_t, std::string>> ckpts;
        if (a.checkpoints.empty()) {
            for (uint64_t seed : c.seeds) {
                const auto p = checkpoint_path(c, seed);
                if (!fs::exists(p)) throw std::runtime_error("checkpoint not found: " + p.string());
                ckpts.push_back({seed, p.string()});
            }
        } else {
            for (size_t i = 0; i < a.checkpoints.size(); ++i)
                ckpts.push_back({c.seeds.at(std::min(i, c.seeds.size() - 1)), a.checkpoints[i]});
        }
        const auto want = expected_layout(c, provider.get());
        for (const auto& [seed, path] : ckpts) {
            json header;
            TrainedPolicy tp;
            tp.net = load_checkpoint(path, &header);
            if (!(tp.net.layout() == want))
                throw ConfigError("checkpoint " + path + " layout " + to_json(tp.net.layout()).dump() + " does not match config " +
                                  to_json(want).dump());
            tp.pipeline = Pipeline::from_state(header.at("pipeline"), provider.get());
            for (size_t i = 0; i < overlays.size(); ++i) {
                const auto r = evaluate_trained(tp, c, overlays[i], seed);
                rates[i].push_back(r.success_rate);
                report["runs"].push_back({{"seed", seed}, {"overlay", sim::to_string(overlays[i])}, {"checkpoint", path}, {"success", r.success_rate}});
            }
        }
    }
    const auto root = ensure_dir(fs::path(c.output_dir) / "eval");
    std::string csv = "overlay,mean,se,n\n";
    BarSeries bars;
    for (size_t i = 0; i < overlays.size(); ++i) {
        const auto s = success_stats(rates[i]);
        report["overlays"].push_back({{"overlay", sim::to_string(overlays[i])}, {"per_seed", rates[i]}, {"mean", s.mean}, {"se", s.se},
                                      {"single_seed", s.single_seed}});
        csv += sim::to_string(overlays[i]) + "," + fmt(s.mean) + "," + fmt(s.se) + "," + std::to_string(s.n) + "\n";
        bars.labels.push_back(sim::to_string(overlays[i]));
        bars.values.push_back(s.mean);
        bars.errors.push_back(s.se);
    }
    if (overlays.size() == 2) {
        json paired = json::array();
        for (size_t s = 0; s < rates[0].size(); ++s) paired.push_back(rates[0][s] - rates[1][s]);
        report["paired_drop"] = {{"per_seed", paired}, {"mean", success_stats(rates[0]).mean - success_stats(rates[1]).mean}};
    }
    write_json(root / "report.json", report);
    write_text(root / "success.csv", csv);
    write_png((root / "success.png").string(), render_bar_chart(bars));
    std::cout << report["overlays"].dump() << '\n';
    return 0;
}

int cmd_metrics(const RunConfig& c) {
    const auto demos = load_demos(c);
    RunConfig mc = c;
    if (mc.pipeline.provider == ProviderKind::remote) mc.pipeline.provider = ProviderKind::color_hist;  // descriptors unused here
    mc.pipeline.flat = false;
    const auto pipeline = Pipeline::fit(mc.pipeline, demos);
    const auto m = dataset_metrics(pipeline, demos);
    const auto root = ensure_dir(fs::path(c.output_dir) / "metrics");
    json report = m.to_json();
    report["segmenter"] = to_json(mc)["segmenter"];
    write_json(root / "report.json", report);
    std::string ari = "frame,fg_ari\n", bind = "frame,correct,total\n";
    for (size_t i = 0; i < m.ari.size(); ++i) ari += std::to_string(i) + "," + fmt(m.ari[i]) + "\n";
    for (size_t i = 0; i < m.binding.frame_total.size(); ++i)
        bind += std::to_string(i) + "," + std::to_string(m.binding.frame_correct[i]) + "," + std::to_string(m.binding.frame_total[i]) + "\n";
    write_text(root / "fg_ari.csv", ari);
    write_text(root / "binding.csv", bind);
    write_png((root / "metrics.png").string(), render_bar_chart({{"fg_ari", "binding"}, {m.ari_mean, m.binding.accuracy}, {}}));
    std::cout << report.dump() << '\n';
    return 0;
}

int cmd_ablate(const RunConfig& c, const std::string& axis) {
    const auto cells = sweep_cells(c, axis);
    const auto root = ensure_dir(fs::path(c.output_dir) / "ablate" / axis);
    json report = {{"axis", axis}, {"cells", json::array()}};
    std::string csv = "cell,mean,se,n,per_seed\n";
    BarSeries bars;
    LineSeries line;
    for (const auto& cell : cells) {
        auto r = run_cell(cell.config, cell.label, {sim::Overlay::none});
        std::cerr << axis << "=" << cell.label << " done in " << fmt(r.seconds) << " s\n";
        const auto s = r.stats(sim::Overlay::none);
        json j = r.to_json();
        j.erase("seconds");
        j["config"] = to_json(cell.config);
        report["cells"].push_back(j);
        std::string per;
        for (double v : r.rates(sim::Overlay::none)) per += (per.empty() ? "" : ";") + fmt(v);
        csv += cell.label + "," + fmt(s.mean) + "," + fmt(s.se) + "," + std::to_string(s.n) + "," + per + "\n";
        bars.labels.push_back(cell.label);
        bars.values.push_back(s.mean);
        bars.errors.push_back(s.se);
        line.x.push_back(cell.x);
        line.y.push_back(s.mean);
        line.errors.push_back(s.se);
    }
    write_json(root / "report.json", report);
    write_text(root / "table.csv", csv);
    write_png((root / "plot.png").string(), sweep_is_numeric(axis) ? render_line_chart({line}) : render_bar_chart(bars));
    std::cout << csv;
    return 0;
}

int cmd_bind(const RunConfig& c, int episode) {
    const auto demos = load_demos(c);
    if (episode < 0 || episode >= static_cast<int>(demos.size())) throw ConfigError("episode index out of range");
    auto provider = open_provider(c);
    RunConfig bc = c;
    bc.pipeline.flat = false;
    const auto pipeline = Pipeline::fit(bc.pipeline, demos, provider.get());
    const auto& d = demos[static_cast<size_t>(episode)];
    json frames = json::array();
    for (size_t t = 0; t < d.steps.size(); ++t) {
        const auto& st = d.steps[t];
        const auto key = frame_key(d.metadata.seed, t);
        const auto cands = pipeline.candidates(st.observation, st.gt_masks, key);
        const auto enc = pipeline.encode(st.observation, st.gt_masks, key);
        json slots = json::array();
        for (const auto& s : enc.binding.assignment.slot_to_candidate) slots.push_back(s ? json(*s) : json(nullptr));
        json costs = json::array();
        for (int i = 0; i < enc.binding.costs.rows; ++i) {
            json row = json::array();
            for (int j = 0; j < enc.binding.costs.cols; ++j) row.push_back(enc.binding.costs.at(i, j));
            costs.push_back(row);
        }
        frames.push_back({{"step", t}, {"candidates", cands.size()}, {"slot_to_candidate", slots}, {"costs", costs}});
    }
    const auto root = ensure_dir(fs::path(c.output_dir) / "bind");
    char name[32];
    std::snprintf(name, sizeof name, "episode_%04d.json", episode);
    json out = {{"episode", episode}, {"seed", d.metadata.seed}, {"entities", d.metadata.entities}, {"k", pipeline.reference().k},
                {"reference_filled", pipeline.reference().filled()}, {"frames", frames}};
    write_json(root / name, out);
    std::cout << (root / name).string() << '\n';
    return 0;
}

int cmd_serve_check(const RunConfig& c) {
    if (c.adapter_url.empty()) throw ConfigError("serve-check needs --adapter-url");
    AdapterClient client(c.adapter_url, 5);
    const auto& h = client.handshake();
    std::cout << json{{"protocol_version", h.protocol_version}, {"segmenter", h.segmenter}, {"embedder", h.embedder},
                      {"dimension", h.dimension}, {"match_dimension", h.match_dimension}}
                     .dump()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"object-centric slot pipeline for behaviour cloning"};
    app.require_subcommand(1);
    Globals g;
    bool print_schema = false;
    app.add_option("--config", g.config_path, "JSON run config");
    app.add_option("--output-dir", g.output_dir, "output root (default $POCR_OUTPUT_DIR or ./pocr_out)");
    app.add_flag("--print-schema", print_schema, "print the config JSON schema and exit");
    app.set_help_all_flag("--help-all");
    app.fallthrough();

    Overrides o;
    auto* gen = app.add_subcommand("gen-demos", "generate scripted-expert demonstrations");
    auto* train = app.add_subcommand("train", "train policies, one per seed");
    auto* eval = app.add_subcommand("eval", "evaluate checkpoints (or the expert)");
    auto* metrics = app.add_subcommand("metrics", "FG-ARI and binding accuracy on a dataset");
    auto* ablate = app.add_subcommand("ablate", "sweep one axis and tabulate success");
    auto* bind = app.add_subcommand("bind", "dump slot assignments for one episode");
    auto* serve = app.add_subcommand("serve-check", "handshake with the adapter service");
    auto* schema = app.add_subcommand("schema", "print the config JSON schema");
    for (auto* sc : {gen, train, eval, metrics, ablate, bind, serve}) o.attach(sc);

    EvalArgs ea;
    eval->add_option("--checkpoint", ea.checkpoints, "checkpoint file(s)");
    eval->add_flag("--expert", ea.expert, "evaluate the scripted expert");
    std::string axis;
    ablate->add_option("--axis", axis, "where | screening | demos | baseline")->required();
    int episode = 0;
    bind->add_option("--episode", episode, "episode index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (print_schema || schema->parsed()) {
            std::cout << run_config_schema().dump(2) << '\n';
            return 0;
        }
        const RunConfig c = load_config(g, o);
        if (gen->parsed()) return cmd_gen_demos(c);
        if (train->parsed()) return cmd_train(c);
        if (eval->parsed()) return cmd_eval(c, ea);
        if (metrics->parsed()) return cmd_metrics(c);
        if (ablate->parsed()) return cmd_ablate(c, axis);
        if (bind->parsed()) return cmd_bind(c, episode);
        if (serve->parsed()) return cmd_serve_check(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const AdapterConfigError& e) {
        std::cerr << "adapter config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}
