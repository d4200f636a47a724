#pragma once

#include <span>
#include <string>
#include <vector>

#include "pocr/binding.hpp"
#include "pocr/descriptors.hpp"
#include "pocr/imaging.hpp"

namespace pocr {

enum class WhereVariant { bbox, centroid, none };

std::string to_string(WhereVariant v);
WhereVariant parse_where_variant(const std::string& name);
int where_width(WhereVariant v);

struct WhereEncoding {
    WhereVariant variant = WhereVariant::bbox;
    std::vector<float> values;

    static WhereEncoding of_mask(WhereVariant variant, const BinaryMask& mask);
    bool is_sentinel() const;
    bool operator==(const WhereEncoding&) const = default;
};

struct Slot {
    int index = 0;
    WhereEncoding where;
    std::vector<float> z;

    bool empty() const;
    bool operator==(const Slot&) const = default;
};

/// Ordered k-tuple of (z, where) pairs for one frame.
struct SceneRepresentation {
    int dimension = 0;
    WhereVariant variant = WhereVariant::bbox;
    std::vector<Slot> slots;

    int k() const { return static_cast<int>(slots.size()); }
    int slot_width() const { return dimension + where_width(variant); }
    /// Per-slot [z, where] rows, concatenated.
    std::vector<float> flatten() const;
    static SceneRepresentation unflatten(int k, int dimension, WhereVariant variant, std::span<const float> flat);
    bool operator==(const SceneRepresentation&) const = default;
};

/// Provider applied to the full-frame masked image; zero vector for an
/// empty mask.
std::vector<float> slot_vector(const DescriptorProvider& provider, const Image& image, const BinaryMask& mask);

SceneRepresentation encode_slots(const DescriptorProvider& provider, WhereVariant variant, const Image& image,
                                 std::span<const BinaryMask> slot_masks);

struct EncodedFrame {
    SceneRepresentation scene;
    BindResult binding;
};

EncodedFrame encode_scene(const ReferenceSlotSet& ref, const DescriptorProvider& provider, WhereVariant variant,
                          const Image& image, std::span<const BinaryMask> screened, const BindOptions& opts = {});

// .pocr cache: "POCR" magic, u32 version, u32 k, u32 D, u32 variant,
// u32 frame count, then k*(D+|where|) little-endian f32 per frame.
void write_scene_cache(const std::string& path, std::span<const SceneRepresentation> frames);
std::vector<SceneRepresentation> read_scene_cache(const std::string& path);

}  // namespace pocr
