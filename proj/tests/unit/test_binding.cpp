#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "pocr/binding.hpp"
#include "pocr/hungarian.hpp"
#include "pocr/sim.hpp"

using namespace pocr;

namespace {

// Exhaustive minimum over injective row->column maps (rows <= cols) or
// column->row maps (cols < rows); unmatched columns cost nothing.
double brute_force_min(const CostMatrix& c) {
    const int n = std::min(c.rows, c.cols), m = std::max(c.rows, c.cols);
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    double best = 1e300;
    do {
        // summed in row order, like any per-row reading of an assignment
        std::vector<double> per_row(c.rows, 0.0);
        for (int i = 0; i < n; ++i) {
            if (c.rows <= c.cols) per_row[i] = c.at(i, idx[i]);
            else per_row[idx[i]] = c.at(idx[i], i);
        }
        double total = 0;
        for (double v : per_row) total += v;
        best = std::min(best, total);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

CostMatrix random_costs(std::mt19937_64& rng, int r, int c) {
    std::uniform_real_distribution<double> u(0.0, 2.0);
    CostMatrix m(r, c);
    for (auto& e : m.entries) e = u(rng);
    return m;
}

void paint_disk(Image& img, BinaryMask* mask, float cx, float cy, float radius, sim::Rgb col) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float dx = x + 0.5f - cx, dy = y + 0.5f - cy;
            if (dx * dx + dy * dy <= radius * radius) {
                img.set_pixel(x, y, col.r / 255.0f, col.g / 255.0f, col.b / 255.0f);
                if (mask) mask->set(x, y);
            }
        }
}

struct TwoObjects {
    Image image;
    std::vector<BinaryMask> masks;  // red, blue
};

TwoObjects two_objects(float red_x, float blue_x) {
    TwoObjects t{Image(48, 48, 0.8f), {BinaryMask(48, 48), BinaryMask(48, 48)}};
    paint_disk(t.image, &t.masks[0], red_x, 24, 6, {220, 30, 30});
    paint_disk(t.image, &t.masks[1], blue_x, 24, 6, {30, 40, 210});
    return t;
}

}  // namespace

TEST_CASE("hungarian examples") {
    CostMatrix a(2, 2);
    a.entries = {0, 1, 1, 0};
    const auto sa = hungarian(a);
    CHECK(sa.slot_to_candidate[0] == 0);
    CHECK(sa.slot_to_candidate[1] == 1);
    CHECK(assignment_cost(a, sa) == 0.0);

    CostMatrix b(1, 2);
    b.entries = {0.3, 0.1};
    const auto sb = hungarian(b);
    CHECK_FALSE(sb.slot_to_candidate[0].has_value());
    CHECK(sb.slot_to_candidate[1] == 0);
}

TEST_CASE("hungarian rejects NaN, infinite and negative costs") {
    CostMatrix c(2, 2, 0.5);
    c.at(0, 1) = std::nan("");
    CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
    c.at(0, 1) = -0.1;
    CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
    c.at(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(c), std::invalid_argument);
}

TEST_CASE("hungarian equals brute force on 100 random 5x5 matrices") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const auto c = random_costs(rng, 5, 5);
        CHECK(assignment_cost(c, hungarian(c)) == doctest::Approx(brute_force_min(c)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian equals brute force on 500 rectangular and square matrices up to 6x6") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> dim(1, 6);
    const auto t0 = std::chrono::steady_clock::now();
    int exact = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = random_costs(rng, dim(rng), dim(rng));
        const auto rows = solve_assignment(c);
        std::vector<int> used(c.cols, 0);
        double total = 0;
        int matched = 0;
        for (int r = 0; r < c.rows; ++r)
            if (rows[r] >= 0) {
                CHECK(++used[rows[r]] == 1);
                total += c.at(r, rows[r]);
                ++matched;
            }
        CHECK(matched == std::min(c.rows, c.cols));
        exact += total == brute_force_min(c);
    }
    CHECK(exact == 500);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
}

TEST_CASE("adding a constant to every entry leaves the assignment unchanged") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_costs(rng, 4, 4);
        const auto before = hungarian(c);
        for (auto& e : c.entries) e += 0.75;
        CHECK(hungarian(c) == before);
    }
}

TEST_CASE("matching descriptor: determinism, translation, zero guard") {
    const auto a = two_objects(12, 36), b = two_objects(20, 36);
    const auto da = matching_descriptor(a.image, a.masks[0]);
    CHECK(da == matching_descriptor(a.image, a.masks[0]));
    CHECK(cosine_distance(da, matching_descriptor(a.image, a.masks[0])) == doctest::Approx(0.0).epsilon(1e-9));
    const auto moved = matching_descriptor(b.image, b.masks[0]);
    const auto other = matching_descriptor(a.image, a.masks[1]);
    CHECK(cosine_distance(da, moved) < cosine_distance(da, other));

    Image black(16, 16);
    BinaryMask m(16, 16);
    m.set(3, 3);
    m.set(4, 4);
    const auto z = matching_descriptor(black, m);
    CHECK(std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; }));
    CHECK(cosine_distance(z, da) == 1.0);
    CHECK_THROWS(matching_descriptor(black, BinaryMask(16, 16)));
}

TEST_CASE("matching descriptor separates the simulator palette under translation") {
    const auto& pal = sim::distractor_palette();
    std::vector<sim::Rgb> colors = {sim::target_color(), sim::fixed_distractor_color()};
    colors.insert(colors.end(), pal.begin(), pal.end());
    for (size_t i = 0; i < colors.size(); ++i) {
        Image a(40, 40, 0.8f), b(40, 40, 0.8f);
        BinaryMask ma(40, 40), mb(40, 40);
        paint_disk(a, &ma, 10, 12, 4, colors[i]);
        paint_disk(b, &mb, 27, 30, 4, colors[i]);
        const auto da = matching_descriptor(a, ma);
        const double same = cosine_distance(da, matching_descriptor(b, mb));
        for (size_t j = 0; j < colors.size(); ++j) {
            if (j == i || colors[j] == colors[i]) continue;
            Image c(40, 40, 0.8f);
            BinaryMask mc(40, 40);
            paint_disk(c, &mc, 27, 30, 4, colors[j]);
            CHECK(same < cosine_distance(da, matching_descriptor(c, mc)));
        }
    }
}

TEST_CASE("build_reference examples") {
    const auto t = two_objects(12, 36);
    BinaryMask third(48, 48);
    Image img = t.image;
    paint_disk(img, &third, 24, 40, 5, {30, 200, 40});
    const std::vector<BinaryMask> screened = {t.masks[0], t.masks[1], third};

    const auto ref = build_reference(img, screened, {});
    CHECK(ref.k == 10);
    CHECK(ref.filled() == 3);
    CHECK(ref.ref_masks == screened);

    const std::vector<BinaryMask> excl = {t.masks[1]};
    const auto ref2 = build_reference(img, screened, excl);
    REQUIRE(ref2.filled() == 2);
    CHECK(ref2.ref_masks[0] == t.masks[0]);
    CHECK(ref2.ref_masks[1] == third);

    ReferenceOptions small;
    small.k = 2;
    CHECK_THROWS(build_reference(img, screened, {}, small));
}

TEST_CASE("bind_frame: identity, fewer candidates, swap follows appearance") {
    const auto t = two_objects(12, 36);
    const auto ref = build_reference(t.image, t.masks, {});

    const auto same = bind_frame(ref, t.image, t.masks);
    CHECK(same.assignment.slot_to_candidate[0] == 0);
    CHECK(same.assignment.slot_to_candidate[1] == 1);
    CHECK(same.slot_masks[0] == t.masks[0]);
    CHECK(same.slot_masks[1] == t.masks[1]);
    for (int s = 2; s < 10; ++s) CHECK(same.slot_masks[s].empty());

    // reversed candidate order must not change which slot gets which object
    const std::vector<BinaryMask> reversed = {t.masks[1], t.masks[0]};
    const auto rev = bind_frame(ref, t.image, reversed);
    CHECK(rev.assignment.slot_to_candidate[0] == 1);
    CHECK(rev.assignment.slot_to_candidate[1] == 0);

    const auto swapped = two_objects(36, 12);
    const auto sw = bind_frame(ref, swapped.image, swapped.masks);
    CHECK(sw.slot_masks[0] == swapped.masks[0]);  // red stays in slot 0 though it moved right
    CHECK(sw.slot_masks[1] == swapped.masks[1]);

    const auto json = assignment_record(3, sw);
    CHECK(json["frame"] == 3);
    CHECK(json["slot_to_candidate"].size() == 10);
}

TEST_CASE("bind_frame: two candidates against five reference slots") {
    Image img(60, 20, 0.8f);
    std::vector<BinaryMask> masks;
    const sim::Rgb cols[5] = {{220, 30, 30}, {30, 40, 210}, {30, 200, 40}, {230, 210, 20}, {150, 40, 160}};
    for (int i = 0; i < 5; ++i) {
        masks.emplace_back(60, 20);
        paint_disk(img, &masks.back(), 6.0f + 12.0f * i, 10, 4, cols[i]);
    }
    const auto ref = build_reference(img, masks, {});
    const std::vector<BinaryMask> two = {masks[3], masks[1]};
    const auto r = bind_frame(ref, img, two);
    CHECK(r.assignment.filled() == 2);
    CHECK(r.slot_masks[3] == masks[3]);
    CHECK(r.slot_masks[1] == masks[1]);
    int empty = 0;
    for (int s = 0; s < 5; ++s) empty += r.slot_masks[s].empty();
    CHECK(empty == 3);
}

TEST_CASE("tau_match rejects poor matches into empty slots") {
    const auto t = two_objects(12, 36);
    const std::vector<BinaryMask> only_red = {t.masks[0]};
    const auto ref = build_reference(t.image, only_red, {});
    const std::vector<BinaryMask> only_blue = {t.masks[1]};
    CHECK(bind_frame(ref, t.image, only_blue).assignment.filled() == 1);
    BindOptions strict;
    strict.tau_match = 0.3;
    CHECK(bind_frame(ref, t.image, only_blue, strict).assignment.filled() == 0);
    CHECK(bind_frame(ref, t.image, only_red, strict).assignment.filled() == 1);
}
