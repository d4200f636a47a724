#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/binding.hpp"
#include "pocr/demos.hpp"
#include "pocr/policy.hpp"
#include "pocr/screening.hpp"
#include "pocr/sim.hpp"
#include "pocr/whatwhere.hpp"

namespace pocr {

/// Everything needed to turn a frame into a SceneRepresentation.
struct PipelineConfig {
    int k = kDefaultSlotCount;
    WhereVariant where = WhereVariant::bbox;
    ProviderKind provider = ProviderKind::color_hist;
    /// Flat baseline: provider applied to the whole unmasked frame as one slot.
    bool flat = false;
    sim::SegmenterConfig segmenter;
    bool screening = true;
    ScreeningThresholds taus;
    KMeansOptions kmeans;
    int background_refs = 50;
    std::optional<double> tau_match;
    /// Entities whose reference-frame GT masks are excluded from binding.
    std::vector<std::string> excluded_entities;
    /// Descriptor for slot matching: "crop" (resized RGB crop) or a built-in
    /// provider name used on the masked crop.
    std::string matcher = "crop";
};

nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Fitted pipeline: background model plus reference slots. Reference is the
/// first frame of the first demonstration.
class Pipeline {
public:
    Pipeline() = default;
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;
    Pipeline(Pipeline&&) = default;
    Pipeline& operator=(Pipeline&&) = default;

    /// `provider` overrides the built-in descriptor (e.g. a remote one); the
    /// pipeline does not own it.
    static Pipeline fit(const PipelineConfig& cfg, const std::vector<Demonstration>& demos,
                        const DescriptorProvider* provider = nullptr);

    const PipelineConfig& config() const { return cfg_; }
    const BackgroundModel& background() const { return bg_; }
    const ReferenceSlotSet& reference() const { return ref_; }
    const DescriptorProvider& provider() const { return *provider_; }

    /// Proposals after screening (or, with screening off, sorted by area).
    std::vector<BinaryMask> candidates(const Image& image, const std::vector<BinaryMask>& gt_masks,
                                       uint64_t frame_key) const;

    /// Reference slots built from one demonstration frame with this
    /// pipeline's segmenter, screening, exclusions and matcher.
    ReferenceSlotSet make_reference(const Demonstration& demo, size_t step = 0) const;
    EncodedFrame encode(const ReferenceSlotSet& ref, const Image& image, const std::vector<BinaryMask>& gt_masks,
                        uint64_t frame_key) const;
    EncodedFrame encode(const Image& image, const std::vector<BinaryMask>& gt_masks, uint64_t frame_key) const;
    SceneRepresentation represent(const Image& image, const std::vector<BinaryMask>& gt_masks, uint64_t frame_key) const;

    PolicyLayout layout(int action_dim = 3) const;

    /// Serialized state (config, background model, reference masks and
    /// descriptors) for checkpoint headers.
    nlohmann::json state() const;
    static Pipeline from_state(const nlohmann::json& j, const DescriptorProvider* provider = nullptr);

private:
    void attach_provider(const DescriptorProvider* provider);
    void attach_matcher();

    PipelineConfig cfg_;
    BackgroundModel bg_;
    ReferenceSlotSet ref_;
    std::unique_ptr<DescriptorProvider> owned_;
    std::unique_ptr<DescriptorProvider> matcher_;
    const DescriptorProvider* provider_ = nullptr;
};

uint64_t frame_key(uint64_t episode_seed, size_t step);

/// Keyframe supervision pairs encoded through the pipeline.
std::vector<Sample> build_samples(const Pipeline& pipeline, const std::vector<Demonstration>& demos,
                                  double eps_v = kDefaultVelocityEps);

struct SampleRef {
    size_t episode;
    size_t step;
};

/// Same pairs as build_samples, in the same order, as (episode, step) refs.
std::vector<SampleRef> sample_refs(const std::vector<Demonstration>& demos, double eps_v = kDefaultVelocityEps);

/// Random-crop augmentation source: crops the source frame and its GT masks
/// identically, then re-runs segmentation and encoding.
SampleSource crop_augmenter(const Pipeline& pipeline, const std::vector<Demonstration>& demos,
                            const std::vector<Sample>& samples, int pad, double eps_v = kDefaultVelocityEps);

sim::PolicyFn learned_policy(const Pipeline& pipeline, const PolicyNet& net);

}  // namespace pocr
