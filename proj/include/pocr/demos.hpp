#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pocr/imaging.hpp"

namespace pocr {

enum class GripperState { open, closed };

inline float gripper_value(GripperState g) { return g == GripperState::closed ? 1.0f : 0.0f; }

struct Step {
    Image observation;
    std::vector<float> action;    // commanded (dx, dy, gripper) in the 2D simulator
    GripperState gripper = GripperState::open;
    std::vector<float> velocity;  // pose delta over the step, units/step
    std::vector<float> pose;      // end-effector pose after the step
    std::vector<BinaryMask> gt_masks;  // one per entity, entity order of the demo
};

struct DemoMetadata {
    std::string task;
    uint64_t seed = 0;
    bool success = false;
    std::vector<std::string> entities;  // names aligned with Step::gt_masks
    std::vector<size_t> waypoints;      // expert waypoint step indices, if scripted
};

struct Demonstration {
    std::vector<Step> steps;
    DemoMetadata metadata;
};

struct KeyframeSet {
    std::vector<size_t> indices;
};

inline constexpr double kDefaultVelocityEps = 1e-3;

/// Step t > 0 is a keyframe when the gripper state changes or the max-abs
/// velocity drops below eps_v; the final step is always included.
KeyframeSet discover_keyframes(const Demonstration& demo, double eps_v = kDefaultVelocityEps);

struct KeyframePair {
    size_t source_step;          // observation index
    std::vector<float> target;   // (pose..., gripper) at the next keyframe
};

/// Sources are t = 0 followed by every keyframe but the last.
std::vector<KeyframePair> to_keyframe_pairs(const Demonstration& demo, const KeyframeSet& keyframes);

struct CropResult {
    Image image;
    std::vector<BinaryMask> masks;
    int dx = 0;
    int dy = 0;
};

/// Shifts the image and every mask by the same random offset in
/// [-pad, pad]^2 pixels, zero-filling uncovered pixels.
CropResult random_crop(const Image& image, const std::vector<BinaryMask>& masks, int pad, uint64_t seed);

struct DatasetInfo {
    std::string task;
    int width = 0;
    int height = 0;
    int action_dim = 3;
};

/// Writes manifest.json plus episode_%04d/{frame_%04d.png, steps.jsonl,
/// gt_masks/frame_%04d.rle}. Overwrites episode directories it writes.
void save_dataset(const std::string& root, const std::vector<Demonstration>& demos, const DatasetInfo& info);

/// Verifies per-episode checksums; throws on any mismatch or malformed file.
std::vector<Demonstration> load_dataset(const std::string& root, DatasetInfo* info = nullptr);

}  // namespace pocr
