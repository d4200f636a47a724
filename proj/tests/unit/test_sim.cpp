#include <doctest.h>

#include <cmath>
#include <random>

#include "pocr/experiment.hpp"
#include "pocr/metrics.hpp"
#include "pocr/sim.hpp"

using namespace pocr;

namespace {

double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST_CASE("reset is deterministic and validates its inputs") {
    const auto task = sim::make_task("pick_cup_2d");
    CHECK(sim::reset(task, 17) == sim::reset(task, 17));
    CHECK_FALSE(sim::reset(task, 17) == sim::reset(task, 18));
    CHECK(sim::render(sim::reset(task, 17), task).image == sim::render(sim::reset(task, 17), task).image);
    CHECK_THROWS(sim::make_task("stack_blocks"));
    CHECK_THROWS(sim::make_task("pick_cup_2d", -1));
}

TEST_CASE("zero distractors: target and gripper masks only") {
    const auto task = sim::make_task("pick_cup_2d", 0);
    const auto obs = sim::render(sim::reset(task, 2), task);
    CHECK(obs.gt_masks.size() == 2);
    CHECK(obs.entities.back() == "gripper");
}

TEST_CASE("1000 seeds: objects never overlap at spawn") {
    const auto task = sim::make_task("pick_cup_2d");
    int violations = 0;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const auto s = sim::reset(task, seed);
        REQUIRE(s.objects.size() == 3);
        for (size_t i = 0; i < s.objects.size(); ++i)
            for (size_t j = i + 1; j < s.objects.size(); ++j)
                violations += dist(s.objects[i].position, s.objects[j].position) < s.objects[i].radius + s.objects[j].radius;
        const auto obs = sim::render(s, task);
        for (size_t i = 0; i + 1 < obs.gt_masks.size(); ++i)
            for (size_t j = i + 1; j + 1 < obs.gt_masks.size(); ++j)
                violations += intersection_area(obs.gt_masks[i], obs.gt_masks[j]) > 0;
    }
    CHECK(violations == 0);
}

TEST_CASE("zero action only advances the step counter") {
    const auto task = sim::make_task("pick_cup_2d");
    const auto s = sim::reset(task, 4);
    auto next = sim::step(s, {0.0, 0.0, 0.0}, task).scene;
    CHECK(next.step_count == s.step_count + 1);
    next.step_count = s.step_count;
    CHECK(next == s);
    CHECK_THROWS(sim::step(s, {0.0, 0.0}, task));
    CHECK_THROWS(sim::step(s, {std::nan(""), 0.0, 0.0}, task));
}

TEST_CASE("motion is clipped to the maximum speed") {
    const auto task = sim::make_task("pick_cup_2d");
    const auto s = sim::reset(task, 4);
    const auto next = sim::step(s, {0.5, 0.0, 0.0}, task).scene;
    CHECK(dist(next.gripper.position, s.gripper.position) <= task.max_speed + 1e-6);
}

TEST_CASE("move to object, close, carry, open puts the target in the goal") {
    const auto task = sim::make_task("pick_cup_2d");
    auto s = sim::reset(task, 9);
    const auto target = s.objects[0].position;
    const auto goal = s.goal.center();
    s = sim::execute_keyframe_action(s, {target.x, target.y, 0.0}, task);
    s = sim::execute_keyframe_action(s, {target.x, target.y, 1.0}, task);
    CHECK(s.gripper.holding == 0);
    CHECK_FALSE(sim::task_success(s));
    s = sim::execute_keyframe_action(s, {goal.x, goal.y, 1.0}, task);
    s = sim::execute_keyframe_action(s, {goal.x, goal.y, 0.0}, task);
    CHECK(s.goal.contains(s.objects[0].position));
    CHECK(sim::task_success(s));
}

TEST_CASE("scripted expert succeeds on 1000 seeds") {
    const auto task = sim::make_task("pick_cup_2d");
    int ok = 0;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const auto d = sim::scripted_expert(sim::reset(task, seed), task, seed);
        ok += d.metadata.success && d.metadata.waypoints.size() == 3;
    }
    CHECK(ok == 1000);
}

TEST_CASE("target already in the goal gives a one-waypoint demo") {
    const auto task = sim::make_task("pick_cup_2d");
    auto s = sim::reset(task, 1);
    s.objects[0].position = s.goal.center();
    const auto d = sim::scripted_expert(s, task);
    CHECK(d.metadata.success);
    CHECK(d.metadata.waypoints.size() == 1);
    CHECK(discover_keyframes(d).indices == d.metadata.waypoints);
}

TEST_CASE("segmenter: oracle identity, drop everything, injected proposals") {
    const auto task = sim::make_task("pick_cup_2d");
    const auto obs = sim::render(sim::reset(task, 5), task);
    sim::SegmenterConfig oracle;
    oracle.part_masks = false;
    const auto props = sim::segment(oracle, obs.image, obs.gt_masks, 0);
    const int w = obs.image.width, h = obs.image.height;
    CHECK(fg_ari(labeling_from_masks(props, w, h), labeling_from_masks(obs.gt_masks, w, h)) == 1.0);

    sim::SegmenterConfig all_dropped;
    all_dropped.kind = sim::SegmenterKind::noisy;
    all_dropped.drop_prob = 1.0;
    CHECK(sim::segment(all_dropped, obs.image, obs.gt_masks, 0).empty());

    sim::SegmenterConfig inject = oracle;
    inject.injected_background = 20;
    CHECK(sim::segment(inject, obs.image, obs.gt_masks, 0).size() == props.size() + 20);

    sim::SegmenterConfig bad;
    bad.drop_prob = 1.5;
    CHECK_THROWS(sim::segment(bad, obs.image, obs.gt_masks, 0));
}

TEST_CASE("segmenter jitter of one pixel on a 20-pixel disk keeps IoU >= 0.8") {
    Image img(64, 64, 0.8f);
    BinaryMask disk(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (std::hypot(x + 0.5 - 32, y + 0.5 - 32) <= 20) disk.set(x, y), img.set_pixel(x, y, 0.9f, 0.1f, 0.1f);
    sim::SegmenterConfig cfg;
    cfg.kind = sim::SegmenterKind::noisy;
    cfg.jitter = 1;
    cfg.part_masks = false;
    for (uint64_t key = 0; key < 50; ++key) {
        const auto props = sim::segment(cfg, img, {disk}, key);
        REQUIRE(props.size() == 1);
        CHECK(iou(props[0], disk) >= 0.8);
    }
}

TEST_CASE("evaluation: expert scores 100%, episodes are paired by seed") {
    const auto task = sim::make_task("pick_cup_2d");
    const sim::PolicyFn expert = [&](const sim::Scene& s, const sim::Observation&, uint64_t) {
        return sim::expert_action(s, task);
    };
    const auto report = sim::evaluate_policy(expert, task, 50, 3);
    CHECK(report.success_rate == 1.0);
    CHECK(report.episodes.size() == 50);

    std::vector<sim::Scene> seen;
    const sim::PolicyFn idle = [&](const sim::Scene& s, const sim::Observation&, uint64_t) {
        seen.push_back(s);  // the idle policy never moves, so every decision repeats
        return std::vector<double>{s.gripper.position.x, s.gripper.position.y, 0.0};
    };
    const auto other = sim::evaluate_policy(idle, task, 50, 3);
    CHECK(other.success_rate == 0.0);
    REQUIRE(seen.size() == 50u * task.horizon);
    for (size_t i = 0; i < 50; ++i) {
        CHECK(other.episodes[i].seed == report.episodes[i].seed);
        CHECK(seen[i * task.horizon] == sim::reset(task, report.episodes[i].seed));
    }
    CHECK_THROWS(sim::evaluate_policy(expert, task, 0, 3));
}

TEST_CASE("an untrained policy scores near zero over 100 episodes") {
    RunConfig c;
    c.demos = 10;
    c.train.gradient_steps = 0;
    const auto task = task_spec(c);
    const auto demos = sim::generate_demos(task, c.demos, 0);
    const auto tp = train_policy(c, demos, 0);
    const auto report = evaluate_trained(tp, c, sim::Overlay::none, 0);
    CHECK(report.episodes.size() == 100);
    CHECK(report.success_rate <= 0.1);
}

TEST_CASE("overlays change only what they claim to") {
    const auto base = sim::make_task("pick_cup_2d");
    const auto nd = sim::make_task("pick_cup_2d", 2, sim::Overlay::new_distractor);
    const auto nb = sim::make_task("pick_cup_2d", 2, sim::Overlay::new_background);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = sim::reset(base, seed), b = sim::reset(nd, seed), c = sim::reset(nb, seed);
        CHECK(b.objects.size() == a.objects.size() + 1);
        CHECK(b.objects.back().color == sim::unseen_distractor_color());
        CHECK(c.objects == a.objects);
        CHECK_FALSE(c.background == a.background);
    }
    for (auto o : {sim::Overlay::none, sim::Overlay::new_distractor, sim::Overlay::new_background})
        CHECK(sim::parse_overlay(sim::to_string(o)) == o);
}

TEST_CASE("demo generation is seeded and contact sheets tile frames") {
    const auto task = sim::make_task("pick_cup_2d");
    const auto a = sim::generate_demos(task, 2, 11), b = sim::generate_demos(task, 2, 11);
    CHECK(a[1].steps.back().observation == b[1].steps.back().observation);
    CHECK(a[0].metadata.seed == sim::episode_seed(11, sim::kDemoStream, 0));
    const auto sheet = sim::contact_sheet({a[0].steps[0].observation, a[0].steps[1].observation});
    CHECK(sheet.width == 64 * 2 + 1);
    CHECK(sheet.height == 64);
}
