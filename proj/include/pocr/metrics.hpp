#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/binding.hpp"
#include "pocr/imaging.hpp"

namespace pocr {

/// Per-pixel integer labels with a foreground mask.
struct Labeling {
    int width = 0;
    int height = 0;
    std::vector<int> labels;
    BinaryMask foreground;

    Labeling() = default;
    Labeling(int w, int h) : width(w), height(h), labels(static_cast<size_t>(w) * h, 0), foreground(w, h) {}
    int at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

/// Label i+1 for the first mask covering a pixel, 0 elsewhere; foreground is
/// the union of the masks.
Labeling labeling_from_masks(std::span<const BinaryMask> masks, int width, int height);

/// Adjusted Rand index over gt.foreground pixels. Both sides a single cluster
/// counts as 1.0.
double fg_ari(const Labeling& pred, const Labeling& gt);

/// One frame of a bound episode.
struct BindingFrame {
    std::vector<BinaryMask> gt_masks;    // entity order fixed across the dataset
    std::vector<BinaryMask> candidates;  // masks the pipeline bound from
    SlotAssignment assignment;           // slot -> candidate index
};

struct BindingReport {
    std::vector<int> frame_correct;
    std::vector<int> frame_total;
    std::vector<int> frames_with_missing_slots;  // flat frame indices
    long correct = 0;
    long total = 0;
    double accuracy = 0.0;
    nlohmann::json to_json() const;
};

/// IoU matching (max total IoU, a pair counts only when IoU > 0). Returns,
/// per row mask, the matched column index or -1.
std::vector<int> iou_match(std::span<const BinaryMask> rows, std::span<const BinaryMask> cols);

/// Reference GT masks are IoU-matched to the reference slots; each frame's GT
/// masks are IoU-matched to its candidates; a slot counts as correct when
/// the pipeline picked the candidate its entity matched (or both are empty).
/// Only slots matched to a GT entity on the reference frame are scored.
BindingReport binding_accuracy(std::span<const BinaryMask> ref_gt_masks, const ReferenceSlotSet& ref,
                               std::span<const BindingFrame> frames);

struct SuccessStats {
    double mean = 0.0;
    double se = 0.0;
    int n = 0;
    bool single_seed = false;
};

/// Mean and standard error (sample stddev / sqrt(n)).
SuccessStats success_stats(std::span<const double> per_seed);

}  // namespace pocr
