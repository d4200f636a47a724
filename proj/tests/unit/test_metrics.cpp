#include <doctest.h>

#include <random>

#include "pocr/experiment.hpp"
#include "pocr/metrics.hpp"

using namespace pocr;

namespace {

// Rand-index pair counting over every pair of gt-foreground pixels.
double pair_counting_ari(const Labeling& pred, const Labeling& gt) {
    std::vector<int> a, b;
    for (size_t i = 0; i < gt.labels.size(); ++i)
        if (gt.foreground.bits[i]) a.push_back(pred.labels[i]), b.push_back(gt.labels[i]);
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = i + 1; j < a.size(); ++j) {
            const bool sp = a[i] == a[j], sg = b[i] == b[j];
            n11 += sp && sg;
            n10 += sp && !sg;
            n01 += !sp && sg;
            n00 += !sp && !sg;
        }
    const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if (den == 0) return 1.0;
    return 2.0 * (n00 * n11 - n01 * n10) / den;
}

Labeling random_labeling(std::mt19937_64& rng, int w, int h, int clusters, double fg) {
    Labeling l(w, h);
    std::uniform_int_distribution<int> lab(1, clusters);
    std::bernoulli_distribution on(fg);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (on(rng)) {
                l.labels[static_cast<size_t>(y) * w + x] = lab(rng);
                l.foreground.set(x, y);
            }
    return l;
}

BinaryMask rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryMask m(w, h);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.set(x, y);
    return m;
}

}  // namespace

TEST_CASE("fg_ari equals pair counting on 200 random labelings") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> side(2, 16), k(1, 6);
    double worst = 0;
    int evaluated = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int w = side(rng), h = side(rng);
        auto gt = random_labeling(rng, w, h, k(rng), 0.7);
        if (gt.foreground.empty()) gt.foreground.set(0, 0), gt.labels[0] = 1;
        auto pred = random_labeling(rng, w, h, k(rng), 0.8);
        if (trial % 5 == 0) pred = gt;  // include the identity now and then
        worst = std::max(worst, std::abs(fg_ari(pred, gt) - pair_counting_ari(pred, gt)));
        ++evaluated;
    }
    CHECK(evaluated == 200);
    CHECK(worst < 1e-9);
}

TEST_CASE("fg_ari examples") {
    std::mt19937_64 rng(3);
    const auto gt = random_labeling(rng, 8, 8, 4, 0.9);
    CHECK(fg_ari(gt, gt) == doctest::Approx(1.0));
    auto permuted = gt;
    for (auto& v : permuted.labels)
        if (v > 0) v = 5 - v;
    CHECK(fg_ari(permuted, gt) == doctest::Approx(1.0));

    // two 4-pixel objects merged into one predicted label
    Labeling two(4, 2), merged(4, 2);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 2; ++y) {
            two.labels[y * 4 + x] = x < 2 ? 1 : 2;
            two.foreground.set(x, y);
            merged.labels[y * 4 + x] = 1;
        }
    CHECK(fg_ari(merged, two) == doctest::Approx(0.0));
    CHECK(fg_ari(two, two) == 1.0);

    Labeling single(3, 3);
    for (int i = 0; i < 9; ++i) single.labels[i] = 1, single.foreground.bits[i] = 1;
    CHECK(fg_ari(single, single) == 1.0);
    CHECK_THROWS(fg_ari(Labeling(3, 3), Labeling(3, 3)));
}

TEST_CASE("labeling_from_masks gives the first covering mask") {
    const auto a = rect(4, 4, 0, 0, 2, 2), b = rect(4, 4, 1, 1, 3, 3);
    const std::vector<BinaryMask> masks = {a, b};
    const auto l = labeling_from_masks(masks, 4, 4);
    CHECK(l.at(1, 1) == 1);
    CHECK(l.at(2, 2) == 2);
    CHECK(l.at(3, 3) == 0);
    CHECK(l.foreground.area() == 7);
}

TEST_CASE("binding accuracy: one wrong slot in one frame of a 10-frame, 5-slot episode") {
    const int w = 30, h = 6;
    std::vector<BinaryMask> gt;
    Image img(w, h, 0.5f);
    const float cols[5][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {0, 1, 1}};
    for (int i = 0; i < 5; ++i) {
        gt.push_back(rect(w, h, 6 * i, 0, 6 * i + 4, 4));
        for (int y = 0; y < 4; ++y)
            for (int x = 6 * i; x < 6 * i + 4; ++x) img.set_pixel(x, y, cols[i][0], cols[i][1], cols[i][2]);
    }
    const auto ref = build_reference(img, gt, {});
    std::vector<BindingFrame> frames;
    std::mt19937 rng(1);
    for (int f = 0; f < 10; ++f) {
        BindingFrame fr;
        fr.gt_masks = gt;
        std::vector<int> order = {0, 1, 2, 3, 4};
        std::shuffle(order.begin(), order.end(), rng);
        fr.assignment.slot_to_candidate.assign(10, std::nullopt);
        for (int c = 0; c < 5; ++c) {
            fr.candidates.push_back(gt[order[c]]);
            fr.assignment.slot_to_candidate[order[c]] = c;
        }
        if (f == 6) {
            fr.candidates.push_back(rect(w, h, 0, 5, 30, 6));  // spurious strip
            fr.assignment.slot_to_candidate[2] = 5;
        }
        frames.push_back(std::move(fr));
    }
    const auto report = binding_accuracy(gt, ref, frames);
    CHECK(report.correct == 49);
    CHECK(report.total == 50);
    CHECK(report.accuracy == doctest::Approx(0.98));
    CHECK(report.frame_correct[6] == 4);
    CHECK(report.to_json()["accuracy"] == doctest::Approx(0.98));
    CHECK_THROWS(binding_accuracy({}, ref, frames));
}

TEST_CASE("iou_match maximizes total IoU") {
    const auto a = rect(10, 10, 0, 0, 4, 4), b = rect(10, 10, 5, 5, 9, 9);
    const std::vector<BinaryMask> rows = {a, b}, cols = {b, rect(10, 10, 0, 0, 4, 3)};
    CHECK(iou_match(rows, cols) == std::vector<int>{1, 0});
    const std::vector<BinaryMask> far = {rect(10, 10, 9, 0, 10, 1)};
    CHECK(iou_match(far, cols) == std::vector<int>{-1});
}

TEST_CASE("success_stats examples") {
    const std::vector<double> flat = {0.8, 0.8, 0.8};
    const auto a = success_stats(flat);
    CHECK(a.mean == doctest::Approx(0.8));
    CHECK(a.se == doctest::Approx(0.0));
    const std::vector<double> pair = {0.7, 0.9};
    const auto b = success_stats(pair);
    CHECK(b.mean == doctest::Approx(0.8));
    CHECK(b.se == doctest::Approx(0.1));
    const std::vector<double> one = {0.6};
    const auto c = success_stats(one);
    CHECK(c.se == 0.0);
    CHECK(c.single_seed);
    CHECK_FALSE(b.single_seed);
}

TEST_CASE("dataset metrics: oracle is perfect, dropped masks show up as missing slots") {
    RunConfig c;
    const auto task = task_spec(c);
    const auto demos = sim::generate_demos(task, 6, 0);
    const auto oracle = Pipeline::fit(c.pipeline, demos);
    const auto m = dataset_metrics(oracle, demos);
    CHECK(m.ari_min == 1.0);
    CHECK(m.binding.accuracy == 1.0);
    CHECK(m.binding.frames_with_missing_slots.empty());

    auto noisy = c.pipeline;
    noisy.segmenter.kind = sim::SegmenterKind::noisy;
    noisy.segmenter.drop_prob = 0.1;
    noisy.tau_match.reset();
    const auto p = Pipeline::fit(noisy, demos);
    const auto n = dataset_metrics(p, demos);
    CHECK(n.binding.accuracy < 1.0);
    CHECK_FALSE(n.binding.frames_with_missing_slots.empty());
}
