#include "pocr/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pocr {

using nlohmann::json;

namespace {

std::string segmenter_kind_name(sim::SegmenterKind k) { return k == sim::SegmenterKind::oracle ? "oracle" : "noisy"; }

sim::SegmenterKind parse_segmenter_kind(const std::string& s) {
    if (s == "oracle") return sim::SegmenterKind::oracle;
    if (s == "noisy") return sim::SegmenterKind::noisy;
    throw std::invalid_argument("unknown segmenter kind: " + s);
}

}  // namespace

json to_json(const PipelineConfig& c) {
    json j = {{"k", c.k},
              {"where", to_string(c.where)},
              {"provider", to_string(c.provider)},
              {"flat", c.flat},
              {"segmenter",
               {{"kind", segmenter_kind_name(c.segmenter.kind)},
                {"drop_prob", c.segmenter.drop_prob},
                {"split_prob", c.segmenter.split_prob},
                {"jitter", c.segmenter.jitter},
                {"seed", c.segmenter.seed},
                {"part_masks", c.segmenter.part_masks},
                {"injected_background", c.segmenter.injected_background}}},
              {"screening", c.screening},
              {"tau_overlap", c.taus.tau_overlap},
              {"tau_bg", c.taus.tau_bg},
              {"bg_clusters", c.kmeans.n_clusters},
              {"bg_seed", c.kmeans.seed},
              {"bg_position_weight", c.kmeans.position_weight},
              {"background_refs", c.background_refs},
              {"excluded_entities", c.excluded_entities},
              {"matcher", c.matcher}};
    j["tau_match"] = c.tau_match ? json(*c.tau_match) : json(nullptr);
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig c;
    c.k = j.at("k").get<int>();
    c.where = parse_where_variant(j.at("where").get<std::string>());
    c.provider = parse_provider_kind(j.at("provider").get<std::string>());
    c.flat = j.at("flat").get<bool>();
    const auto& s = j.at("segmenter");
    c.segmenter.kind = parse_segmenter_kind(s.at("kind").get<std::string>());
    c.segmenter.drop_prob = s.at("drop_prob").get<double>();
    c.segmenter.split_prob = s.at("split_prob").get<double>();
    c.segmenter.jitter = s.at("jitter").get<int>();
    c.segmenter.seed = s.at("seed").get<uint64_t>();
    c.segmenter.part_masks = s.at("part_masks").get<bool>();
    c.segmenter.injected_background = s.at("injected_background").get<int>();
    c.screening = j.at("screening").get<bool>();
    c.taus.tau_overlap = j.at("tau_overlap").get<double>();
    c.taus.tau_bg = j.at("tau_bg").get<double>();
    c.kmeans.n_clusters = j.at("bg_clusters").get<int>();
    c.kmeans.seed = j.at("bg_seed").get<uint64_t>();
    c.kmeans.position_weight = j.value("bg_position_weight", 1.0);
    c.background_refs = j.at("background_refs").get<int>();
    c.excluded_entities = j.at("excluded_entities").get<std::vector<std::string>>();
    c.matcher = j.value("matcher", std::string("crop"));
    if (!j.at("tau_match").is_null()) c.tau_match = j.at("tau_match").get<double>();
    return c;
}

uint64_t frame_key(uint64_t episode_seed, size_t step) { return episode_seed * 1000003ULL + step; }

void Pipeline::attach_provider(const DescriptorProvider* provider) {
    if (provider) {
        provider_ = provider;
        return;
    }
    if (cfg_.provider == ProviderKind::remote) throw std::invalid_argument("remote provider requires an adapter client");
    owned_ = make_builtin_provider(cfg_.provider);
    provider_ = owned_.get();
}

void Pipeline::attach_matcher() {
    if (cfg_.matcher == "crop") {
        matcher_.reset();
        return;
    }
    const auto kind = parse_provider_kind(cfg_.matcher);
    if (kind == ProviderKind::remote) throw std::invalid_argument("matcher must be a built-in provider");
    matcher_ = make_builtin_provider(kind);
}

Pipeline Pipeline::fit(const PipelineConfig& cfg, const std::vector<Demonstration>& demos, const DescriptorProvider* provider) {
    if (demos.empty() || demos.front().steps.empty()) throw std::invalid_argument("pipeline fit: no demonstrations");
    if (cfg.k < 1) throw std::invalid_argument("pipeline fit: k must be >= 1");
    Pipeline p;
    p.cfg_ = cfg;
    p.attach_provider(provider);
    if (cfg.flat) return p;

    // background refs: frame 0 of each demo first, then later frames
    std::vector<Image> refs;
    const size_t want = static_cast<size_t>(std::max(1, cfg.background_refs));
    for (size_t t = 0; refs.size() < want; ++t) {
        bool any = false;
        for (const auto& d : demos) {
            if (t < d.steps.size()) {
                any = true;
                if (refs.size() < want) refs.push_back(d.steps[t].observation);
            }
        }
        if (!any) break;
    }
    p.bg_ = fit_background(refs, cfg.kmeans);
    if (p.bg_.degenerate) throw std::runtime_error("pipeline fit: background model is degenerate");

    p.attach_matcher();
    p.ref_ = p.make_reference(demos.front(), 0);
    return p;
}

ReferenceSlotSet Pipeline::make_reference(const Demonstration& demo, size_t step) const {
    if (cfg_.flat) throw std::logic_error("flat pipeline has no reference slots");
    const auto& st = demo.steps.at(step);
    auto screened = candidates(st.observation, st.gt_masks, frame_key(demo.metadata.seed, step));
    if (!cfg_.screening && static_cast<int>(screened.size()) > cfg_.k) screened.resize(cfg_.k);
    std::vector<BinaryMask> exclusions;
    for (const auto& name : cfg_.excluded_entities) {
        const auto& ents = demo.metadata.entities;
        const auto it = std::find(ents.begin(), ents.end(), name);
        if (it == ents.end()) throw std::invalid_argument("excluded entity not in the reference frame: " + name);
        exclusions.push_back(st.gt_masks.at(static_cast<size_t>(it - ents.begin())));
    }
    ReferenceOptions ro;
    ro.k = cfg_.k;
    ro.matcher = matcher_.get();
    return build_reference(st.observation, screened, exclusions, ro);
}

EncodedFrame Pipeline::encode(const ReferenceSlotSet& ref, const Image& image, const std::vector<BinaryMask>& gt_masks,
                              uint64_t key) const {
    const auto cands = candidates(image, gt_masks, key);
    BindOptions bo;
    bo.tau_match = cfg_.tau_match;
    return encode_scene(ref, *provider_, cfg_.where, image, cands, bo);
}

std::vector<BinaryMask> Pipeline::candidates(const Image& image, const std::vector<BinaryMask>& gt_masks,
                                             uint64_t key) const {
    auto raw = sim::segment(cfg_.segmenter, image, gt_masks, key);
    if (!cfg_.screening) {
        std::vector<size_t> order(raw.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return raw[a].area() > raw[b].area(); });
        std::vector<BinaryMask> out;
        for (size_t i : order) out.push_back(std::move(raw[i]));
        return out;
    }
    const BinaryMask bg = background_mask(bg_, image);
    return screen_proposals(make_proposal_set(std::move(raw), bg), bg, cfg_.taus);
}

EncodedFrame Pipeline::encode(const Image& image, const std::vector<BinaryMask>& gt_masks, uint64_t key) const {
    if (cfg_.flat) throw std::logic_error("flat pipeline has no slot binding");
    return encode(ref_, image, gt_masks, key);
}

SceneRepresentation Pipeline::represent(const Image& image, const std::vector<BinaryMask>& gt_masks, uint64_t key) const {
    if (cfg_.flat) {
        SceneRepresentation s;
        s.dimension = provider_->dimension();
        s.variant = WhereVariant::none;
        Slot slot;
        slot.index = 0;
        slot.where = {WhereVariant::none, {}};
        slot.z = provider_->describe(image);
        if (static_cast<int>(slot.z.size()) != s.dimension) throw std::runtime_error("provider returned a wrong-sized vector");
        s.slots.push_back(std::move(slot));
        return s;
    }
    return encode(image, gt_masks, key).scene;
}

PolicyLayout Pipeline::layout(int action_dim) const {
    if (cfg_.flat) return {1, provider_->dimension(), WhereVariant::none, action_dim};
    return {cfg_.k, provider_->dimension(), cfg_.where, action_dim};
}

json Pipeline::state() const {
    json j = {{"config", to_json(cfg_)}};
    if (cfg_.flat) return j;
    j["background"] = to_json(bg_);
    json masks = json::array();
    for (const auto& m : ref_.ref_masks) masks.push_back(encode_rle(m));
    j["reference"] = {{"k", ref_.k},
                      {"match_side", ref_.match_side},
                      {"masks", masks},
                      {"descriptors", ref_.ref_descriptors},
                      {"excluded_slots", ref_.excluded_slots}};
    return j;
}

Pipeline Pipeline::from_state(const json& j, const DescriptorProvider* provider) {
    Pipeline p;
    p.cfg_ = pipeline_config_from_json(j.at("config"));
    p.attach_provider(provider);
    if (p.cfg_.flat) return p;
    p.bg_ = background_model_from_json(j.at("background"));
    const auto& r = j.at("reference");
    p.ref_.k = r.at("k").get<int>();
    p.ref_.match_side = r.at("match_side").get<int>();
    for (const auto& m : r.at("masks")) p.ref_.ref_masks.push_back(decode_rle(m.get<std::string>()));
    p.ref_.ref_descriptors = r.at("descriptors").get<std::vector<std::vector<float>>>();
    p.ref_.excluded_slots = r.at("excluded_slots").get<std::set<int>>();
    p.attach_matcher();
    p.ref_.matcher = p.matcher_.get();
    if (p.ref_.ref_masks.size() != p.ref_.ref_descriptors.size()) throw std::runtime_error("reference masks/descriptors misaligned");
    return p;
}

std::vector<SampleRef> sample_refs(const std::vector<Demonstration>& demos, double eps_v) {
    std::vector<SampleRef> refs;
    for (size_t e = 0; e < demos.size(); ++e) {
        const auto pairs = to_keyframe_pairs(demos[e], discover_keyframes(demos[e], eps_v));
        for (const auto& p : pairs) refs.push_back({e, p.source_step});
    }
    return refs;
}

std::vector<Sample> build_samples(const Pipeline& pipeline, const std::vector<Demonstration>& demos, double eps_v) {
    std::vector<Sample> out;
    for (const auto& d : demos) {
        const auto pairs = to_keyframe_pairs(d, discover_keyframes(d, eps_v));
        for (const auto& p : pairs) {
            const auto& st = d.steps[p.source_step];
            out.push_back({pipeline.represent(st.observation, st.gt_masks, frame_key(d.metadata.seed, p.source_step)), p.target});
        }
    }
    return out;
}

SampleSource crop_augmenter(const Pipeline& pipeline, const std::vector<Demonstration>& demos,
                            const std::vector<Sample>& samples, int pad, double eps_v) {
    auto refs = sample_refs(demos, eps_v);
    if (refs.size() != samples.size()) throw std::invalid_argument("crop_augmenter: samples do not match demos");
    return [&pipeline, &demos, &samples, refs = std::move(refs), pad](size_t i, uint64_t seed) {
        const auto& d = demos[refs[i].episode];
        const auto& st = d.steps[refs[i].step];
        const auto crop = random_crop(st.observation, st.gt_masks, pad, seed);
        return Sample{pipeline.represent(crop.image, crop.masks, frame_key(d.metadata.seed, refs[i].step)), samples[i].action};
    };
}

sim::PolicyFn learned_policy(const Pipeline& pipeline, const PolicyNet& net) {
    return [&pipeline, &net](const sim::Scene&, const sim::Observation& obs, uint64_t key) {
        return net.forward(pipeline.represent(obs.image, obs.gt_masks, key));
    };
}

}  // namespace pocr
