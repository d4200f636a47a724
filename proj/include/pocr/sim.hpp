#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/demos.hpp"
#include "pocr/imaging.hpp"

namespace pocr::sim {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

enum class Shape { disk, square };

struct SimObject {
    std::string name;
    Shape shape = Shape::disk;
    Rgb color;
    Point2 position;
    double radius = 0.075;
    bool operator==(const SimObject&) const = default;
};

struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(Point2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    Point2 center() const { return {static_cast<float>((x0 + x1) / 2), static_cast<float>((y0 + y1) / 2)}; }
    bool operator==(const Rect&) const = default;
};

enum class BackgroundStyle { plain, textured, cloth };

struct Background {
    BackgroundStyle style = BackgroundStyle::textured;
    Rgb color{205, 200, 190};
    bool operator==(const Background&) const = default;
};

struct Gripper {
    Point2 position;
    GripperState state = GripperState::open;
    std::optional<int> holding;
    bool operator==(const Gripper&) const = default;
};

/// Object 0 is the target. Coordinates are normalized to [0, 1].
struct Scene {
    std::vector<SimObject> objects;
    Rect goal;
    Gripper gripper;
    Background background;
    int step_count = 0;
    bool operator==(const Scene&) const = default;
};

enum class Overlay { none, new_distractor, new_background };

std::string to_string(Overlay o);
Overlay parse_overlay(const std::string& name);

struct TaskSpec {
    std::string name = "pick_cup_2d";
    int distractors = 2;
    Overlay overlay = Overlay::none;
    int width = 64;
    int height = 64;
    double object_radius = 0.075;
    double max_speed = 0.1;
    double grasp_radius = 0.075;
    int max_steps = 200;
    int horizon = 8;  // keyframe decisions per evaluation episode
    Rect goal{0.75, 0.3, 1.0, 0.7};
    Rect object_spawn{0.1, 0.28, 0.6, 0.9};
    Rect gripper_spawn{0.12, 0.32, 0.62, 0.88};
    double object_separation = 0.06;   // extra gap between object rims
    double gripper_clearance = 0.22;   // min gripper-to-object centre distance at spawn
};

/// Rejects unknown task names and nonsensical geometry.
TaskSpec make_task(const std::string& name, int distractors = 2, Overlay overlay = Overlay::none);

Rgb target_color();
Rgb fixed_distractor_color();
const std::vector<Rgb>& distractor_palette();  // colours a randomized distractor may take
Rgb unseen_distractor_color();
Rgb gripper_color();

struct Observation {
    Image image;
    std::vector<BinaryMask> gt_masks;   // objects in scene order, then the gripper
    std::vector<std::string> entities;
};

Scene reset(const TaskSpec& task, uint64_t seed);
Observation render(const Scene& scene, const TaskSpec& task);

/// action = (dx, dy, gripper). Motion is clipped to max_speed; gripper >= 0.5
/// means closed.
struct StepResult {
    Scene scene;
    bool done = false;
};
StepResult step(const Scene& scene, const std::vector<double>& action, const TaskSpec& task);

bool task_success(const Scene& scene);

/// Move to the target, dwell (pre-grasp), close (grasp), carry to the goal
/// centre and open (release). Waypoint indices land in metadata.waypoints.
Demonstration scripted_expert(const Scene& scene, const TaskSpec& task, uint64_t seed = 0);

enum class SegmenterKind { oracle, noisy };

struct SegmenterConfig {
    SegmenterKind kind = SegmenterKind::oracle;
    double drop_prob = 0.0;
    double split_prob = 0.0;
    int jitter = 0;
    uint64_t seed = 0;
    bool part_masks = true;          // oracle over-completeness
    int injected_background = 0;     // extra background-texture proposals per frame
};

/// Raw over-complete proposals for one frame. frame_key decorrelates noise
/// across frames while keeping everything reproducible.
std::vector<BinaryMask> segment(const SegmenterConfig& cfg, const Image& image, const std::vector<BinaryMask>& gt_masks,
                                uint64_t frame_key);

/// Absolute keyframe action (x, y, gripper) chosen from the current state.
using PolicyFn = std::function<std::vector<double>(const Scene&, const Observation&, uint64_t frame_key)>;

/// Expert wrapped as a keyframe policy.
std::vector<double> expert_action(const Scene& scene, const TaskSpec& task);

struct EpisodeLog {
    uint64_t seed = 0;
    bool success = false;
    int decisions = 0;
    std::vector<std::vector<double>> actions;
    nlohmann::json to_json() const;
};

struct EvalReport {
    double success_rate = 0.0;
    std::vector<EpisodeLog> episodes;
};

/// Moves toward the action's (x, y) in equal steps no longer than max_speed,
/// then applies the gripper command.
Scene execute_keyframe_action(const Scene& scene, const std::vector<double>& action, const TaskSpec& task,
                              std::vector<Scene>* trace = nullptr);

uint64_t episode_seed(uint64_t base, uint64_t stream, uint64_t index);

inline constexpr uint64_t kDemoStream = 1;
inline constexpr uint64_t kEvalStream = 2;

EvalReport evaluate_policy(const PolicyFn& policy, const TaskSpec& task, int n_episodes, uint64_t seed);

/// Demonstrations for seeds episode_seed(seed, kDemoStream, i).
std::vector<Demonstration> generate_demos(const TaskSpec& task, int count, uint64_t seed);

/// Horizontal strip of frames, 1 px separators.
Image contact_sheet(const std::vector<Image>& frames);

}  // namespace pocr::sim
