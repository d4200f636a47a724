#include "pocr/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

namespace pocr {

using nlohmann::json;

std::string to_string(TrainProfile p) { return p == TrainProfile::sim ? "sim" : "real"; }

TrainProfile parse_train_profile(const std::string& name) {
    if (name == "sim") return TrainProfile::sim;
    if (name == "real") return TrainProfile::real;
    throw ConfigError("unknown profile: " + name);
}

ProfileDefaults profile_defaults(TrainProfile p) {
    ProfileDefaults d;
    d.policy.mlp = {256, 256};
    if (p == TrainProfile::sim) {
        d.policy.sa = AttentionConfig{4, 64};
        d.policy.activation = Activation::leaky_relu;
        d.train.adam.lr = 5e-4;
        d.train.batch_size = 128;
        d.train.gradient_steps = 2000;
    } else {
        d.policy.sa = AttentionConfig{4, 256};
        d.policy.activation = Activation::relu;
        d.train.adam.lr = 1e-3;
        d.train.batch_size = 64;
        d.train.gradient_steps = 10000;
        d.train.augmentation = AugmentationKind::random_crop;
    }
    return d;
}

PipelineConfig default_pipeline_config() {
    PipelineConfig p;
    p.kmeans.n_clusters = 32;
    p.kmeans.position_weight = 0.0;
    p.tau_match = 0.3;
    p.matcher = "color_hist";
    return p;
}

namespace {

std::string augmentation_name(AugmentationKind a) { return a == AugmentationKind::none ? "none" : "random_crop"; }

AugmentationKind parse_augmentation(const std::string& s) {
    if (s == "none") return AugmentationKind::none;
    if (s == "random_crop") return AugmentationKind::random_crop;
    throw ConfigError("unknown augmentation: " + s);
}

struct Key {
    const char* name;
    json schema;
    std::function<void(const json&, RunConfig&)> apply;
};

template <typename T>
T as(const json& v, const char* name) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + name + "' has the wrong type");
    }
}

void expect(bool ok, const char* name) {
    if (!ok) throw ConfigError(std::string("config key '") + name + "' has the wrong type");
}

int positive(const json& v, const char* name, int lo = 1) {
    expect(v.is_number_integer(), name);
    const int x = v.get<int>();
    if (x < lo) throw ConfigError(std::string("config key '") + name + "' must be >= " + std::to_string(lo));
    return x;
}

double number(const json& v, const char* name) {
    expect(v.is_number(), name);
    return v.get<double>();
}

std::string text(const json& v, const char* name) {
    expect(v.is_string(), name);
    return v.get<std::string>();
}

bool flag(const json& v, const char* name) {
    expect(v.is_boolean(), name);
    return v.get<bool>();
}

template <typename F>
auto translate(const char* name, F f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key '") + name + "': " + e.what());
    }
}

json enum_schema(std::initializer_list<const char*> values) { return {{"type", "string"}, {"enum", values}}; }

const json kInt = {{"type", "integer"}};
const json kNum = {{"type", "number"}};
const json kBool = {{"type", "boolean"}};
const json kStr = {{"type", "string"}};

void apply_segmenter(const json& v, RunConfig& c) {
    if (!v.is_object()) throw ConfigError("config key 'segmenter' must be an object");
    auto& s = c.pipeline.segmenter;
    for (const auto& [k, x] : v.items()) {
        if (k == "kind") {
            const auto kind = text(x, "segmenter.kind");
            if (kind == "oracle") s.kind = sim::SegmenterKind::oracle;
            else if (kind == "noisy") s.kind = sim::SegmenterKind::noisy;
            else throw ConfigError("unknown segmenter kind: " + kind);
        } else if (k == "drop_prob") {
            s.drop_prob = number(x, "segmenter.drop_prob");
        } else if (k == "split_prob") {
            s.split_prob = number(x, "segmenter.split_prob");
        } else if (k == "jitter") {
            s.jitter = positive(x, "segmenter.jitter", 0);
        } else if (k == "seed") {
            s.seed = as<uint64_t>(x, "segmenter.seed");
        } else if (k == "part_masks") {
            s.part_masks = flag(x, "segmenter.part_masks");
        } else if (k == "injected_background") {
            s.injected_background = positive(x, "segmenter.injected_background", 0);
        } else {
            throw ConfigError("unknown config key 'segmenter." + k + "'");
        }
    }
    for (double p : {s.drop_prob, s.split_prob})
        if (p < 0.0 || p > 1.0) throw ConfigError("segmenter probabilities must lie in [0, 1]");
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"task", kStr, [](const json& v, RunConfig& c) { c.task = text(v, "task"); }},
        {"distractors", kInt, [](const json& v, RunConfig& c) { c.distractors = positive(v, "distractors", 0); }},
        {"seeds", {{"type", "array"}, {"items", kInt}, {"minItems", 1}},
         [](const json& v, RunConfig& c) {
             if (!v.is_array() || v.empty()) throw ConfigError("config key 'seeds' must be a nonempty array");
             c.seeds.clear();
             for (const auto& s : v) {
                 expect(s.is_number_unsigned(), "seeds");
                 c.seeds.push_back(s.get<uint64_t>());
             }
         }},
        {"demos", kInt, [](const json& v, RunConfig& c) { c.demos = positive(v, "demos"); }},
        {"eval_episodes", kInt, [](const json& v, RunConfig& c) { c.eval_episodes = positive(v, "eval_episodes"); }},
        {"overlay", enum_schema({"none", "new_distractor", "new_background"}),
         [](const json& v, RunConfig& c) { c.overlay = translate("overlay", [&] { return sim::parse_overlay(text(v, "overlay")); }); }},
        {"eps_v", kNum, [](const json& v, RunConfig& c) { c.eps_v = number(v, "eps_v"); }},
        {"profile", enum_schema({"sim", "real"}), [](const json&, RunConfig&) {}},  // applied first
        {"k", kInt, [](const json& v, RunConfig& c) { c.pipeline.k = positive(v, "k"); }},
        {"where", enum_schema({"bbox", "centroid", "none"}),
         [](const json& v, RunConfig& c) { c.pipeline.where = translate("where", [&] { return parse_where_variant(text(v, "where")); }); }},
        {"what", enum_schema({"color_hist", "grad_orient", "patch", "remote"}),
         [](const json& v, RunConfig& c) { c.pipeline.provider = translate("what", [&] { return parse_provider_kind(text(v, "what")); }); }},
        {"flat", kBool, [](const json& v, RunConfig& c) { c.pipeline.flat = flag(v, "flat"); }},
        {"segmenter",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties",
           {{"kind", enum_schema({"oracle", "noisy"})},
            {"drop_prob", kNum},
            {"split_prob", kNum},
            {"jitter", kInt},
            {"seed", kInt},
            {"part_masks", kBool},
            {"injected_background", kInt}}}},
         apply_segmenter},
        {"screening", kBool, [](const json& v, RunConfig& c) { c.pipeline.screening = flag(v, "screening"); }},
        {"tau_overlap", kNum, [](const json& v, RunConfig& c) { c.pipeline.taus.tau_overlap = number(v, "tau_overlap"); }},
        {"tau_bg", kNum, [](const json& v, RunConfig& c) { c.pipeline.taus.tau_bg = number(v, "tau_bg"); }},
        {"bg_clusters", kInt, [](const json& v, RunConfig& c) { c.pipeline.kmeans.n_clusters = positive(v, "bg_clusters"); }},
        {"bg_seed", kInt, [](const json& v, RunConfig& c) { c.pipeline.kmeans.seed = as<uint64_t>(v, "bg_seed"); }},
        {"bg_position_weight", kNum,
         [](const json& v, RunConfig& c) {
             c.pipeline.kmeans.position_weight = number(v, "bg_position_weight");
             if (c.pipeline.kmeans.position_weight < 0) throw ConfigError("bg_position_weight must be >= 0");
         }},
        {"background_refs", kInt, [](const json& v, RunConfig& c) { c.pipeline.background_refs = positive(v, "background_refs"); }},
        {"tau_match", {{"type", json::array({"number", "null"})}},
         [](const json& v, RunConfig& c) {
             if (v.is_null()) c.pipeline.tau_match.reset();
             else c.pipeline.tau_match = number(v, "tau_match");
         }},
        {"matcher", enum_schema({"crop", "color_hist", "grad_orient", "patch"}),
         [](const json& v, RunConfig& c) {
             const auto m = text(v, "matcher");
             if (m != "crop") {
                 const auto kind = translate("matcher", [&] { return parse_provider_kind(m); });
                 if (kind == ProviderKind::remote) throw ConfigError("matcher must be a built-in descriptor");
             }
             c.pipeline.matcher = m;
         }},
        {"excluded_entities", {{"type", "array"}, {"items", kStr}},
         [](const json& v, RunConfig& c) {
             expect(v.is_array(), "excluded_entities");
             c.pipeline.excluded_entities.clear();
             for (const auto& e : v) c.pipeline.excluded_entities.push_back(text(e, "excluded_entities"));
         }},
        {"sa_heads", kInt,
         [](const json& v, RunConfig& c) {
             const int h = positive(v, "sa_heads", 0);
             if (h == 0) c.policy.sa.reset();
             else c.policy.sa = AttentionConfig{h, c.policy.sa ? c.policy.sa->hidden : 64};
         }},
        {"sa_hidden", kInt,
         [](const json& v, RunConfig& c) {
             const int w = positive(v, "sa_hidden");
             if (c.policy.sa) c.policy.sa->hidden = w;
         }},
        {"mlp", {{"type", "array"}, {"items", kInt}},
         [](const json& v, RunConfig& c) {
             expect(v.is_array(), "mlp");
             c.policy.mlp.clear();
             for (const auto& w : v) c.policy.mlp.push_back(positive(w, "mlp"));
         }},
        {"activation", enum_schema({"relu", "leaky_relu"}),
         [](const json& v, RunConfig& c) { c.policy.activation = translate("activation", [&] { return parse_activation(text(v, "activation")); }); }},
        {"suppress_empty_slots", kBool, [](const json& v, RunConfig& c) { c.policy.suppress_empty_slots = flag(v, "suppress_empty_slots"); }},
        {"lr", kNum, [](const json& v, RunConfig& c) { c.train.adam.lr = number(v, "lr"); }},
        {"batch_size", kInt, [](const json& v, RunConfig& c) { c.train.batch_size = positive(v, "batch_size"); }},
        {"gradient_steps", kInt, [](const json& v, RunConfig& c) { c.train.gradient_steps = positive(v, "gradient_steps", 0); }},
        {"augmentation", enum_schema({"none", "random_crop"}),
         [](const json& v, RunConfig& c) { c.train.augmentation = parse_augmentation(text(v, "augmentation")); }},
        {"crop_pad", kInt, [](const json& v, RunConfig& c) { c.train.crop_pad = positive(v, "crop_pad", 0); }},
        {"output_dir", kStr, [](const json& v, RunConfig& c) { c.output_dir = text(v, "output_dir"); }},
        {"dataset", kStr, [](const json& v, RunConfig& c) { c.dataset = text(v, "dataset"); }},
        {"adapter_url", kStr, [](const json& v, RunConfig& c) { c.adapter_url = text(v, "adapter_url"); }},
    };
    return table;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    if (j.contains("profile")) {
        c.profile = parse_train_profile(text(j.at("profile"), "profile"));
        const auto d = profile_defaults(c.profile);
        c.policy = d.policy;
        c.train = d.train;
    }
    for (const auto& [name, value] : j.items()) {
        const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return name == k.name; });
        if (it == keys().end()) throw ConfigError("unknown config key '" + name + "'");
        it->apply(value, c);
    }
    if (c.task != "pick_cup_2d") throw ConfigError("unknown task: " + c.task);
    if (c.pipeline.provider == ProviderKind::remote && c.adapter_url.empty())
        throw ConfigError("provider 'remote' needs adapter_url");
    return c;
}

json to_json(const RunConfig& c) {
    const auto& p = c.pipeline;
    json j = {{"task", c.task},
              {"distractors", c.distractors},
              {"seeds", c.seeds},
              {"demos", c.demos},
              {"eval_episodes", c.eval_episodes},
              {"overlay", sim::to_string(c.overlay)},
              {"eps_v", c.eps_v},
              {"profile", to_string(c.profile)},
              {"k", p.k},
              {"where", to_string(p.where)},
              {"what", to_string(p.provider)},
              {"flat", p.flat},
              {"segmenter",
               {{"kind", p.segmenter.kind == sim::SegmenterKind::oracle ? "oracle" : "noisy"},
                {"drop_prob", p.segmenter.drop_prob},
                {"split_prob", p.segmenter.split_prob},
                {"jitter", p.segmenter.jitter},
                {"seed", p.segmenter.seed},
                {"part_masks", p.segmenter.part_masks},
                {"injected_background", p.segmenter.injected_background}}},
              {"screening", p.screening},
              {"tau_overlap", p.taus.tau_overlap},
              {"tau_bg", p.taus.tau_bg},
              {"bg_clusters", p.kmeans.n_clusters},
              {"bg_seed", p.kmeans.seed},
              {"bg_position_weight", p.kmeans.position_weight},
              {"background_refs", p.background_refs},
              {"tau_match", p.tau_match ? json(*p.tau_match) : json(nullptr)},
              {"matcher", p.matcher},
              {"excluded_entities", p.excluded_entities},
              {"sa_heads", c.policy.sa ? c.policy.sa->heads : 0},
              {"mlp", c.policy.mlp},
              {"activation", to_string(c.policy.activation)},
              {"suppress_empty_slots", c.policy.suppress_empty_slots},
              {"lr", c.train.adam.lr},
              {"batch_size", c.train.batch_size},
              {"gradient_steps", c.train.gradient_steps},
              {"augmentation", augmentation_name(c.train.augmentation)},
              {"crop_pad", c.train.crop_pad},
              {"output_dir", c.output_dir},
              {"dataset", c.dataset},
              {"adapter_url", c.adapter_url}};
    if (c.policy.sa) j["sa_hidden"] = c.policy.sa->hidden;
    return j;
}

json run_config_schema() {
    json props = json::object();
    for (const auto& k : keys()) props[k.name] = k.schema;
    return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
            {"title", "pocr run config"},
            {"type", "object"},
            {"additionalProperties", false},
            {"properties", props}};
}

sim::TaskSpec task_spec(const RunConfig& c, sim::Overlay overlay) { return sim::make_task(c.task, c.distractors, overlay); }
sim::TaskSpec task_spec(const RunConfig& c) { return task_spec(c, c.overlay); }

TrainedPolicy train_policy(const RunConfig& c, const std::vector<Demonstration>& demos, uint64_t seed,
                           const DescriptorProvider* provider) {
    auto pipeline = Pipeline::fit(c.pipeline, demos, provider);
    const auto samples = build_samples(pipeline, demos, c.eps_v);
    if (samples.empty()) throw std::runtime_error("no keyframe pairs in the demonstrations");
    PolicyNet net(pipeline.layout(static_cast<int>(samples.front().action.size())), c.policy, seed);
    TrainConfig tc = c.train;
    tc.seed = seed;
    SampleSource aug;
    if (tc.augmentation == AugmentationKind::random_crop) aug = crop_augmenter(pipeline, demos, samples, tc.crop_pad, c.eps_v);
    auto res = train_bc(std::move(net), samples, tc, aug, std::max(1, tc.gradient_steps / 40));
    return {std::move(pipeline), std::move(res.net), std::move(res.loss_curve)};
}

sim::EvalReport evaluate_trained(const TrainedPolicy& p, const RunConfig& c, sim::Overlay overlay, uint64_t seed) {
    return sim::evaluate_policy(learned_policy(p.pipeline, p.net), task_spec(c, overlay), c.eval_episodes, seed);
}

const std::vector<double>& CellResult::rates(sim::Overlay o) const {
    const auto name = sim::to_string(o);
    for (size_t i = 0; i < overlays.size(); ++i)
        if (overlays[i] == name) return success[i];
    throw std::invalid_argument("cell " + label + " was not evaluated under " + name);
}

json CellResult::to_json() const {
    json per = json::object();
    for (size_t i = 0; i < overlays.size(); ++i) {
        const auto s = success_stats(success[i]);
        per[overlays[i]] = {{"per_seed", success[i]}, {"mean", s.mean}, {"se", s.se}, {"single_seed", s.single_seed}};
    }
    return {{"label", label}, {"seeds", seeds}, {"final_loss", final_loss}, {"success", per}, {"seconds", seconds}};
}

CellResult run_cell(const RunConfig& c, const std::string& label, const std::vector<sim::Overlay>& overlays) {
    const auto t0 = std::chrono::steady_clock::now();
    CellResult r;
    r.label = label;
    r.seeds = c.seeds;
    for (auto o : overlays) r.overlays.push_back(sim::to_string(o));
    r.success.assign(overlays.size(), {});
    const auto task = task_spec(c, sim::Overlay::none);
    for (uint64_t seed : c.seeds) {
        const auto demos = sim::generate_demos(task, c.demos, seed);
        const auto trained = train_policy(c, demos, seed);
        r.final_loss.push_back(trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back().second);
        for (size_t i = 0; i < overlays.size(); ++i) r.success[i].push_back(evaluate_trained(trained, c, overlays[i], seed).success_rate);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

json DatasetMetrics::to_json() const {
    return {{"fg_ari", {{"mean", ari_mean}, {"min", ari_min}, {"frames", ari.size()}}}, {"binding", binding.to_json()}};
}

DatasetMetrics dataset_metrics(const Pipeline& pipeline, const std::vector<Demonstration>& demos) {
    DatasetMetrics m;
    size_t offset = 0;
    for (const auto& d : demos) {
        if (d.steps.empty()) continue;
        for (const auto& st : d.steps)
            if (st.gt_masks.empty()) throw std::runtime_error("dataset metrics: episode without GT masks");
        const auto ref = pipeline.make_reference(d, 0);
        std::vector<BindingFrame> frames;
        for (size_t t = 0; t < d.steps.size(); ++t) {
            const auto& st = d.steps[t];
            const auto key = frame_key(d.metadata.seed, t);
            const int w = st.observation.width, h = st.observation.height;
            auto cands = pipeline.candidates(st.observation, st.gt_masks, key);
            m.ari.push_back(fg_ari(labeling_from_masks(cands, w, h), labeling_from_masks(st.gt_masks, w, h)));
            auto enc = pipeline.encode(ref, st.observation, st.gt_masks, key);
            frames.push_back({st.gt_masks, std::move(cands), std::move(enc.binding.assignment)});
        }
        const auto rep = binding_accuracy(d.steps.front().gt_masks, ref, frames);
        m.binding.frame_correct.insert(m.binding.frame_correct.end(), rep.frame_correct.begin(), rep.frame_correct.end());
        m.binding.frame_total.insert(m.binding.frame_total.end(), rep.frame_total.begin(), rep.frame_total.end());
        for (int f : rep.frames_with_missing_slots) m.binding.frames_with_missing_slots.push_back(f + static_cast<int>(offset));
        m.binding.correct += rep.correct;
        m.binding.total += rep.total;
        offset += d.steps.size();
    }
    if (m.ari.empty()) throw std::runtime_error("dataset metrics: no frames");
    m.binding.accuracy = m.binding.total > 0 ? static_cast<double>(m.binding.correct) / m.binding.total : 1.0;
    double sum = 0.0;
    m.ari_min = 1.0;
    for (double a : m.ari) sum += a, m.ari_min = std::min(m.ari_min, a);
    m.ari_mean = sum / m.ari.size();
    return m;
}

RunConfig flat_baseline(const RunConfig& c) {
    RunConfig f = c;
    f.pipeline.flat = true;
    f.pipeline.provider = ProviderKind::patch;
    return f;
}

bool sweep_is_numeric(const std::string& axis) { return axis == "demos"; }

std::vector<SweepCell> sweep_cells(const RunConfig& base, const std::string& axis) {
    std::vector<SweepCell> cells;
    if (axis == "where") {
        double x = 0;
        for (auto w : {WhereVariant::bbox, WhereVariant::centroid, WhereVariant::none}) {
            RunConfig c = base;
            c.pipeline.where = w;
            cells.push_back({to_string(w), c, x++});
        }
    } else if (axis == "screening") {
        for (bool on : {true, false}) {
            RunConfig c = base;
            c.pipeline.screening = on;
            c.pipeline.segmenter.injected_background = kAblationInjectedBackground;
            cells.push_back({on ? "on" : "off", c, on ? 1.0 : 0.0});
        }
    } else if (axis == "demos") {
        for (int n : {10, 25, 50, 100}) {
            RunConfig c = base;
            c.demos = n;
            cells.push_back({std::to_string(n), c, static_cast<double>(n)});
        }
    } else if (axis == "baseline") {
        cells.push_back({"structured", base, 0.0});
        cells.push_back({"flat", flat_baseline(base), 1.0});
    } else {
        throw ConfigError("unknown sweep axis: " + axis + " (where, screening, demos, baseline)");
    }
    return cells;
}

}  // namespace pocr
