#include "pocr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace pocr::sim {

namespace {

// Gripper geometry (normalized units, relative to the gripper point). Two
// jaws hang above the grasp point; their spread is the only visible trace
// of the open/closed state.
constexpr double kJawHalfWidth = 0.024;
constexpr double kJawHeight = 0.08;
constexpr double kJawGap = 0.05;  // between object rim and jaw tips
constexpr double kJawOffsetOpen = 0.07;
constexpr double kJawOffsetClosed = 0.035;

double jaw_tip_offset(double radius) { return radius + kJawGap; }

float unit(uint8_t v) { return static_cast<float>(v) / 255.0f; }

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Box {
    double x0, y0, x1, y1;
    bool intersects(const Box& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

Box gripper_box(Point2 p, double radius, double offset) {
    const double tip = p.y - jaw_tip_offset(radius);
    return {p.x - offset - kJawHalfWidth, tip - kJawHeight, p.x + offset + kJawHalfWidth, tip};
}

Box object_box(const SimObject& o) {
    return {o.position.x - o.radius, o.position.y - o.radius, o.position.x + o.radius, o.position.y + o.radius};
}

double distance(Point2 a, Point2 b) { return std::hypot(double(a.x) - b.x, double(a.y) - b.y); }

bool covers(const SimObject& o, double px, double py, int w, int h) {
    const double dx = (px - o.position.x) * w;
    const double dy = (py - o.position.y) * h;
    const double r = o.radius * std::min(w, h);
    if (o.shape == Shape::disk) return dx * dx + dy * dy <= r * r;
    return std::fabs(dx) <= r && std::fabs(dy) <= r;
}

bool gripper_covers(const Gripper& g, double radius, double px, double py) {
    const double offset = g.state == GripperState::closed ? kJawOffsetClosed : kJawOffsetOpen;
    const double tip = g.position.y - jaw_tip_offset(radius);
    if (py > tip || py < tip - kJawHeight) return false;
    const double dx = std::fabs(px - g.position.x);
    return std::fabs(dx - offset) <= kJawHalfWidth;
}

Rgb background_pixel(const Background& bg, int x, int y) {
    switch (bg.style) {
        case BackgroundStyle::plain:
            return bg.color;
        case BackgroundStyle::textured: {
            const int gx = ((y / 8) % 2 ? x + 4 : x) % 8;
            const int gy = y % 8;
            const bool dot = (gx == 3 || gx == 4) && (gy == 3 || gy == 4);
            if (!dot) return bg.color;
            return {static_cast<uint8_t>(bg.color.r - 20), static_cast<uint8_t>(bg.color.g - 20),
                    static_cast<uint8_t>(bg.color.b - 20)};
        }
        case BackgroundStyle::cloth: {
            if ((x + y) % 4 != 0) return bg.color;
            return {static_cast<uint8_t>(bg.color.r * 0.8), static_cast<uint8_t>(bg.color.g * 0.8),
                    static_cast<uint8_t>(bg.color.b * 0.8)};
        }
    }
    return bg.color;
}

constexpr Rgb kGoalColor{150, 195, 150};

}  // namespace

std::string to_string(Overlay o) {
    switch (o) {
        case Overlay::none: return "none";
        case Overlay::new_distractor: return "new_distractor";
        case Overlay::new_background: return "new_background";
    }
    return "none";
}

Overlay parse_overlay(const std::string& name) {
    if (name == "none") return Overlay::none;
    if (name == "new_distractor") return Overlay::new_distractor;
    if (name == "new_background") return Overlay::new_background;
    throw std::invalid_argument("unknown overlay: " + name);
}

TaskSpec make_task(const std::string& name, int distractors, Overlay overlay) {
    if (name != "pick_cup_2d") throw std::invalid_argument("unknown task: " + name);
    if (distractors < 0 || distractors > 1 + static_cast<int>(distractor_palette().size())) {
        throw std::invalid_argument("distractor count out of range for the palette");
    }
    TaskSpec t;
    t.name = name;
    t.distractors = distractors;
    t.overlay = overlay;
    return t;
}

Rgb target_color() { return {205, 45, 45}; }
Rgb fixed_distractor_color() { return {45, 85, 200}; }
const std::vector<Rgb>& distractor_palette() {
    static const std::vector<Rgb> p = {{60, 165, 75}, {215, 195, 50}, {135, 70, 170}, {55, 175, 185}};
    return p;
}
Rgb unseen_distractor_color() { return {235, 130, 40}; }
Rgb gripper_color() { return {70, 70, 75}; }

uint64_t episode_seed(uint64_t base, uint64_t stream, uint64_t index) {
    return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

Scene reset(const TaskSpec& task, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto in_rect = [&](const Rect& r) {
        return Point2{static_cast<float>(r.x0 + (r.x1 - r.x0) * u01(rng)),
                      static_cast<float>(r.y0 + (r.y1 - r.y0) * u01(rng))};
    };

    Scene s;
    s.goal = task.goal;
    s.background = task.overlay == Overlay::new_background ? Background{BackgroundStyle::cloth, {60, 85, 165}}
                                                           : Background{BackgroundStyle::textured, {205, 200, 190}};

    std::vector<SimObject> objs;
    objs.push_back({"target", Shape::disk, target_color(), {}, task.object_radius});
    std::vector<Rgb> palette = distractor_palette();
    for (int d = 0; d < task.distractors; ++d) {
        SimObject o;
        o.name = "distractor_" + std::to_string(d);
        o.shape = u01(rng) < 0.5 ? Shape::disk : Shape::square;
        o.radius = task.object_radius;
        if (d == 0) {
            o.color = fixed_distractor_color();
        } else {
            std::uniform_int_distribution<size_t> pick(0, palette.size() - 1);
            const size_t i = pick(rng);
            o.color = palette[i];
            palette.erase(palette.begin() + static_cast<long>(i));
        }
        objs.push_back(o);
    }
    if (task.overlay == Overlay::new_distractor) {
        objs.push_back({"novel_distractor", Shape::disk, unseen_distractor_color(), {}, task.object_radius});
    }

    // Each attempt places every object and then the gripper with up to 100
    // samples apiece; the whole layout is redrawn when anything fails.
    auto place_objects = [&]() {
        for (size_t i = 0; i < objs.size(); ++i) {
            bool ok = false;
            for (int t = 0; t < 100 && !ok; ++t) {
                objs[i].position = in_rect(task.object_spawn);
                ok = true;
                for (size_t j = 0; j < i && ok; ++j)
                    ok = distance(objs[i].position, objs[j].position) >= objs[i].radius + objs[j].radius + task.object_separation;
            }
            if (!ok) return false;
        }
        return true;
    };
    auto place_gripper = [&]() {
        for (int t = 0; t < 100; ++t) {
            s.gripper.position = in_rect(task.gripper_spawn);
            const Box gb = gripper_box(s.gripper.position, task.object_radius, kJawOffsetOpen);
            const Box grown{gb.x0 - 0.04, gb.y0 - 0.04, gb.x1 + 0.04, gb.y1 + 0.04};
            bool ok = true;
            for (const auto& o : objs)
                ok = ok && distance(o.position, s.gripper.position) >= task.gripper_clearance && !grown.intersects(object_box(o));
            if (ok) return true;
        }
        return false;
    };
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) placed = place_objects() && place_gripper();
    if (!placed) throw std::runtime_error("reset: scene not placeable after 100 rejection samples");
    s.objects = std::move(objs);
    return s;
}

Observation render(const Scene& scene, const TaskSpec& task) {
    const int w = task.width, h = task.height;
    Observation obs;
    obs.image = Image(w, h);
    // owner: -1 background, i object, n gripper
    const int n = static_cast<int>(scene.objects.size());
    std::vector<int> draw_order;
    for (int i = 0; i < n; ++i)
        if (!scene.gripper.holding || *scene.gripper.holding != i) draw_order.push_back(i);
    if (scene.gripper.holding) draw_order.push_back(*scene.gripper.holding);

    for (int e = 0; e <= n; ++e) obs.gt_masks.emplace_back(w, h);
    for (const auto& o : scene.objects) obs.entities.push_back(o.name);
    obs.entities.push_back("gripper");

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double px = (x + 0.5) / w, py = (y + 0.5) / h;
            Rgb c = background_pixel(scene.background, x, y);
            if (scene.goal.contains({static_cast<float>(px), static_cast<float>(py)})) c = kGoalColor;
            int owner = -1;
            for (int i : draw_order)
                if (covers(scene.objects[i], px, py, w, h)) owner = i;
            if (gripper_covers(scene.gripper, task.object_radius, px, py)) owner = n;
            if (owner >= 0) {
                c = owner == n ? gripper_color() : scene.objects[owner].color;
                obs.gt_masks[owner].set(x, y);
            }
            obs.image.set_pixel(x, y, unit(c.r), unit(c.g), unit(c.b));
        }
    }
    return obs;
}

StepResult step(const Scene& scene, const std::vector<double>& action, const TaskSpec& task) {
    if (action.size() != 3) throw std::invalid_argument("step: action must be (dx, dy, gripper)");
    for (double a : action)
        if (!std::isfinite(a)) throw std::invalid_argument("step: non-finite action");
    StepResult r{scene, false};
    Scene& s = r.scene;
    double dx = action[0], dy = action[1];
    const double norm = std::hypot(dx, dy);
    if (norm > task.max_speed) {
        dx *= task.max_speed / norm;
        dy *= task.max_speed / norm;
    }
    const Point2 old = s.gripper.position;
    s.gripper.position.x = static_cast<float>(std::clamp(old.x + dx, 0.0, 1.0));
    s.gripper.position.y = static_cast<float>(std::clamp(old.y + dy, 0.0, 1.0));
    if (s.gripper.holding) {
        auto& held = s.objects[*s.gripper.holding].position;
        held.x += s.gripper.position.x - old.x;
        held.y += s.gripper.position.y - old.y;
    }
    const GripperState want = action[2] >= 0.5 ? GripperState::closed : GripperState::open;
    if (want != s.gripper.state) {
        if (want == GripperState::closed) {
            double best = task.grasp_radius;
            for (int i = 0; i < static_cast<int>(s.objects.size()); ++i) {
                const double d = distance(s.objects[i].position, s.gripper.position);
                if (d <= best) {
                    best = d;
                    s.gripper.holding = i;
                }
            }
        } else {
            s.gripper.holding.reset();
        }
        s.gripper.state = want;
    }
    ++s.step_count;
    r.done = s.step_count >= task.max_steps;
    return r;
}

bool task_success(const Scene& scene) {
    if (scene.objects.empty()) return false;
    const bool held = scene.gripper.holding && *scene.gripper.holding == 0;
    return !held && scene.goal.contains(scene.objects[0].position);
}

namespace {

Step make_step(const Scene& s, const TaskSpec& task, std::vector<float> action, Point2 prev) {
    auto obs = render(s, task);
    Step st;
    st.observation = std::move(obs.image);
    st.gt_masks = std::move(obs.gt_masks);
    st.action = std::move(action);
    st.gripper = s.gripper.state;
    st.velocity = {s.gripper.position.x - prev.x, s.gripper.position.y - prev.y};
    st.pose = {s.gripper.position.x, s.gripper.position.y};
    return st;
}

int steps_needed(double dist, double max_speed) {
    return std::max(1, static_cast<int>(std::ceil(dist / max_speed - 1e-9)));
}

}  // namespace

Demonstration scripted_expert(const Scene& start, const TaskSpec& task, uint64_t seed) {
    if (start.objects.empty()) throw std::invalid_argument("scripted_expert: scene has no target");
    Demonstration d;
    d.metadata.task = task.name;
    d.metadata.seed = seed;
    for (const auto& o : start.objects) d.metadata.entities.push_back(o.name);
    d.metadata.entities.push_back("gripper");

    Scene s = start;
    d.steps.push_back(make_step(s, task, {0.0f, 0.0f, gripper_value(s.gripper.state)}, s.gripper.position));
    auto apply = [&](double dx, double dy, double g) {
        const Point2 prev = s.gripper.position;
        s = step(s, {dx, dy, g}, task).scene;
        d.steps.push_back(make_step(s, task, {float(dx), float(dy), float(g)}, prev));
    };
    auto move_to = [&](Point2 goal, double g) {
        const double dist = distance(goal, s.gripper.position);
        if (dist < 1e-9) return;
        const int n = steps_needed(dist, task.max_speed);
        const Point2 from = s.gripper.position;
        for (int i = 1; i <= n; ++i) {
            // equal increments; the last step lands on the goal exactly
            const double tx = from.x + (double(goal.x) - from.x) * i / n;
            const double ty = from.y + (double(goal.y) - from.y) * i / n;
            apply(tx - s.gripper.position.x, ty - s.gripper.position.y, g);
        }
    };

    if (task_success(s)) {
        apply(0.0, 0.0, gripper_value(s.gripper.state));
        d.metadata.waypoints = {1};
        d.metadata.success = true;
        return d;
    }
    if (s.gripper.state == GripperState::closed) apply(0.0, 0.0, 0.0);

    move_to(s.objects[0].position, 0.0);
    apply(0.0, 0.0, 0.0);  // pre-grasp dwell
    d.metadata.waypoints.push_back(d.steps.size() - 1);
    apply(0.0, 0.0, 1.0);  // grasp
    d.metadata.waypoints.push_back(d.steps.size() - 1);
    if (!s.gripper.holding || *s.gripper.holding != 0) throw std::runtime_error("scripted_expert: grasp failed");
    const Point2 c{static_cast<float>(s.goal.center().x), static_cast<float>(s.goal.center().y)};
    move_to(c, 1.0);
    apply(0.0, 0.0, 0.0);  // release
    d.metadata.waypoints.push_back(d.steps.size() - 1);
    d.metadata.success = task_success(s);
    if (!d.metadata.success) throw std::runtime_error("scripted_expert: scene is not solvable");
    return d;
}

namespace {

BinaryMask half_split(const BinaryMask& m, bool vertical, bool first) {
    const Point2 c = centroid_of_mask(m);
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.get(x, y)) continue;
            const double v = vertical ? (x + 0.5) / m.width : (y + 0.5) / m.height;
            const double cut = vertical ? c.x : c.y;
            if ((v < cut) == first) out.set(x, y);
        }
    return out;
}

}  // namespace

std::vector<BinaryMask> segment(const SegmenterConfig& cfg, const Image& image, const std::vector<BinaryMask>& gt_masks,
                                uint64_t frame_key) {
    if (cfg.drop_prob < 0 || cfg.drop_prob > 1 || cfg.split_prob < 0 || cfg.split_prob > 1) {
        throw std::invalid_argument("segmenter probabilities must lie in [0, 1]");
    }
    if (cfg.jitter < 0 || cfg.injected_background < 0) throw std::invalid_argument("segmenter jitter/injection must be >= 0");
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(frame_key)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<BinaryMask> out;

    if (cfg.kind == SegmenterKind::oracle) {
        for (const auto& m : gt_masks)
            if (!m.empty()) out.push_back(m);
        if (cfg.part_masks) {
            for (const auto& m : gt_masks) {
                if (m.empty()) continue;
                auto part = half_split(m, true, true);
                if (!part.empty() && part != m) out.push_back(std::move(part));
            }
        }
    } else {
        for (const auto& m : gt_masks) {
            if (m.empty()) continue;
            if (u01(rng) < cfg.drop_prob) continue;
            std::vector<BinaryMask> pieces;
            if (u01(rng) < cfg.split_prob) {
                const bool vertical = u01(rng) < 0.5;
                pieces.push_back(half_split(m, vertical, true));
                pieces.push_back(half_split(m, vertical, false));
            } else {
                pieces.push_back(m);
            }
            for (auto& p : pieces) {
                if (cfg.jitter > 0) p = u01(rng) < 0.5 ? dilate(p, cfg.jitter) : erode(p, cfg.jitter);
                if (!p.empty()) out.push_back(std::move(p));
            }
        }
    }

    if (cfg.injected_background > 0) {
        BinaryMask objects(image.width, image.height);
        for (const auto& m : gt_masks) objects = mask_union(objects, m);
        std::uniform_real_distribution<double> size(0.3, 0.7);
        for (int i = 0; i < cfg.injected_background; ++i) {
            const int rw = std::max(1, static_cast<int>(size(rng) * image.width));
            const int rh = std::max(1, static_cast<int>(size(rng) * image.height));
            const int x0 = std::uniform_int_distribution<int>(0, image.width - rw)(rng);
            const int y0 = std::uniform_int_distribution<int>(0, image.height - rh)(rng);
            BinaryMask r(image.width, image.height);
            for (int y = y0; y < y0 + rh; ++y)
                for (int x = x0; x < x0 + rw; ++x)
                    if (!objects.get(x, y)) r.set(x, y);
            if (!r.empty()) out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<double> expert_action(const Scene& s, const TaskSpec& task) {
    (void)task;
    const Point2 t = s.objects.at(0).position;
    if (s.gripper.holding && *s.gripper.holding == 0) {
        const auto c = s.goal.center();
        return {c.x, c.y, 0.0};
    }
    if (s.gripper.state == GripperState::closed) return {s.gripper.position.x, s.gripper.position.y, 0.0};
    if (distance(t, s.gripper.position) < 1e-6) return {t.x, t.y, 1.0};
    return {t.x, t.y, 0.0};
}

Scene execute_keyframe_action(const Scene& scene, const std::vector<double>& action, const TaskSpec& task,
                              std::vector<Scene>* trace) {
    if (action.size() != 3) throw std::invalid_argument("keyframe action must be (x, y, gripper)");
    Scene s = scene;
    const double gx = std::clamp(std::isfinite(action[0]) ? action[0] : 0.5, 0.0, 1.0);
    const double gy = std::clamp(std::isfinite(action[1]) ? action[1] : 0.5, 0.0, 1.0);
    const double keep = gripper_value(s.gripper.state);
    const double dist = std::hypot(gx - s.gripper.position.x, gy - s.gripper.position.y);
    if (dist > 1e-9) {
        const int n = steps_needed(dist, task.max_speed);
        const Point2 from = s.gripper.position;
        for (int i = 1; i <= n; ++i) {
            const double tx = from.x + (gx - from.x) * i / n;
            const double ty = from.y + (gy - from.y) * i / n;
            s = step(s, {tx - s.gripper.position.x, ty - s.gripper.position.y, keep}, task).scene;
            if (trace) trace->push_back(s);
        }
    }
    const double g = action[2] >= 0.5 ? 1.0 : 0.0;
    if (g != gripper_value(s.gripper.state)) {
        s = step(s, {0.0, 0.0, g}, task).scene;
        if (trace) trace->push_back(s);
    }
    return s;
}

nlohmann::json EpisodeLog::to_json() const {
    return {{"seed", seed}, {"success", success}, {"decisions", decisions}, {"actions", actions}};
}

EvalReport evaluate_policy(const PolicyFn& policy, const TaskSpec& task, int n_episodes, uint64_t seed) {
    if (n_episodes <= 0) throw std::invalid_argument("evaluate_policy: n_episodes must be positive");
    EvalReport report;
    int wins = 0;
    for (int e = 0; e < n_episodes; ++e) {
        EpisodeLog log;
        log.seed = episode_seed(seed, kEvalStream, static_cast<uint64_t>(e));
        Scene s = reset(task, log.seed);
        for (int d = 0; d < task.horizon && !task_success(s); ++d) {
            const auto obs = render(s, task);
            const uint64_t key = log.seed * 31 + static_cast<uint64_t>(d);
            auto a = policy(s, obs, key);
            log.actions.push_back(a);
            s = execute_keyframe_action(s, a, task);
            ++log.decisions;
        }
        log.success = task_success(s);
        wins += log.success ? 1 : 0;
        report.episodes.push_back(std::move(log));
    }
    report.success_rate = static_cast<double>(wins) / n_episodes;
    return report;
}

std::vector<Demonstration> generate_demos(const TaskSpec& task, int count, uint64_t seed) {
    if (count < 0) throw std::invalid_argument("generate_demos: negative count");
    std::vector<Demonstration> demos;
    demos.reserve(count);
    for (int i = 0; i < count; ++i) {
        const uint64_t s = episode_seed(seed, kDemoStream, static_cast<uint64_t>(i));
        demos.push_back(scripted_expert(reset(task, s), task, s));
    }
    return demos;
}

Image contact_sheet(const std::vector<Image>& frames) {
    if (frames.empty()) return {};
    const int h = frames.front().height;
    int w = 0;
    for (const auto& f : frames) {
        if (f.height != h) throw std::invalid_argument("contact_sheet: frames differ in height");
        w += f.width + 1;
    }
    Image sheet(w - 1, h, 1.0f);
    int x0 = 0;
    for (const auto& f : frames) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < f.width; ++x)
                sheet.set_pixel(x0 + x, y, f.at(x, y, 0), f.at(x, y, 1), f.at(x, y, 2));
        x0 += f.width + 1;
    }
    return sheet;
}

}  // namespace pocr::sim
