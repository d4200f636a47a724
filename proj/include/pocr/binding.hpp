#pragma once

#include <optional>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "pocr/descriptors.hpp"
#include "pocr/hungarian.hpp"
#include "pocr/imaging.hpp"

namespace pocr {

inline constexpr int kDefaultSlotCount = 10;
inline constexpr int kDefaultMatchSide = 16;

/// Matching descriptor: the masked image cropped to the mask's box,
/// resized to side x side, flattened RGB, L2-normalized. When `matcher` is
/// given it describes the crop instead (e.g. a remote "match" embedder).
std::vector<float> matching_descriptor(const Image& image, const BinaryMask& mask, int side = kDefaultMatchSide,
                                       const DescriptorProvider* matcher = nullptr);

/// Slot identities fixed on a reference image.
struct ReferenceSlotSet {
    int k = kDefaultSlotCount;
    int match_side = kDefaultMatchSide;
    std::vector<BinaryMask> ref_masks;
    std::vector<std::vector<float>> ref_descriptors;
    std::set<int> excluded_slots;
    const DescriptorProvider* matcher = nullptr;

    int filled() const { return static_cast<int>(ref_masks.size()); }
};

struct ReferenceOptions {
    int k = kDefaultSlotCount;
    int match_side = kDefaultMatchSide;
    double exclusion_iou = 0.5;
    std::set<int> excluded_slots;
    const DescriptorProvider* matcher = nullptr;
};

/// Slots 0..n-1 take the screened masks in selection order after dropping
/// those whose IoU with any exclusion mask exceeds opts.exclusion_iou.
ReferenceSlotSet build_reference(const Image& ref_image, std::span<const BinaryMask> screened,
                                 std::span<const BinaryMask> exclusions, const ReferenceOptions& opts = {});

struct BindOptions {
    /// Matches costing more than this are rejected into empty slots.
    std::optional<double> tau_match;
};

struct BindResult {
    SlotAssignment assignment;
    std::vector<BinaryMask> slot_masks;  // k entries, empty mask for empty slots
    CostMatrix costs;                    // candidates x k
};

BindResult bind_frame(const ReferenceSlotSet& ref, const Image& image, std::span<const BinaryMask> screened,
                      const BindOptions& opts = {});

/// One audit record: {"frame", "slot_to_candidate", "costs"}.
nlohmann::json assignment_record(int frame, const BindResult& result);

}  // namespace pocr
