#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "pocr/whatwhere.hpp"

using namespace pocr;

namespace {

void fill_disk(Image& img, BinaryMask& mask, float cx, float cy, float r, float cr, float cg, float cb) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float dx = x + 0.5f - cx, dy = y + 0.5f - cy;
            if (dx * dx + dy * dy <= r * r) {
                img.set_pixel(x, y, cr, cg, cb);
                mask.set(x, y);
            }
        }
}

struct Fixture {
    Image image{40, 40, 0.0f};
    std::vector<BinaryMask> masks;
};

Fixture three_objects() {
    Fixture f;
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) f.image.set_pixel(x, y, 0.7f + 0.005f * (x % 7), 0.7f, 0.65f);
    f.masks.assign(3, BinaryMask(40, 40));
    fill_disk(f.image, f.masks[0], 8, 8, 4, 0.9f, 0.1f, 0.1f);
    fill_disk(f.image, f.masks[1], 30, 12, 5, 0.1f, 0.2f, 0.9f);
    fill_disk(f.image, f.masks[2], 18, 30, 4, 0.1f, 0.8f, 0.2f);
    return f;
}

}  // namespace

TEST_CASE("slot_vector: empty mask gives the zero vector of length D") {
    Image img(8, 8, 0.5f);
    for (auto kind : {ProviderKind::color_hist, ProviderKind::grad_orient, ProviderKind::patch}) {
        const auto p = make_builtin_provider(kind);
        const auto z = slot_vector(*p, img, BinaryMask(8, 8));
        CHECK(static_cast<int>(z.size()) == p->dimension());
        CHECK(std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; }));
    }
}

TEST_CASE("color_hist of a pure red object over black") {
    Image img(10, 10);
    BinaryMask m(10, 10);
    for (int y = 2; y < 5; ++y)
        for (int x = 2; x < 7; ++x) img.set_pixel(x, y, 1, 0, 0), m.set(x, y);
    ColorHistogramProvider p;
    const auto z = slot_vector(p, img, m);
    REQUIRE(z.size() == 216);
    // bin index r*36 + g*6 + b with r = 5, g = b = 0
    CHECK(z[5 * 36] == doctest::Approx(1.0));
    CHECK(std::accumulate(z.begin(), z.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("patch provider block-averages luma") {
    Image img(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (x < 2 && y < 2) img.set_pixel(x, y, 1, 1, 1);
    PatchProvider p;
    const auto z = p.describe(img);
    REQUIRE(z.size() == 256);
    CHECK(z[0] == doctest::Approx(luma(1, 1, 1)));
    CHECK(std::accumulate(z.begin() + 1, z.end(), 0.0) == 0.0);
}

TEST_CASE("gradient orientation provider: vertical edge lands in the horizontal-gradient bin") {
    Image img(12, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 6; x < 12; ++x) img.set_pixel(x, y, 1, 1, 1);
    GradientOrientationProvider p;
    const auto z = p.describe(img);
    REQUIRE(z.size() == 9);
    CHECK(z[0] == doctest::Approx(1.0));
}

TEST_CASE("where encodings") {
    BinaryMask m(8, 8);
    m.set(2, 3);
    const auto b = WhereEncoding::of_mask(WhereVariant::bbox, m);
    CHECK(b.values == std::vector<float>{0.25f, 0.375f, 0.375f, 0.5f});
    const auto c = WhereEncoding::of_mask(WhereVariant::centroid, m);
    CHECK(c.values[0] == doctest::Approx(2.5 / 8));
    CHECK(c.values[1] == doctest::Approx(3.5 / 8));
    CHECK(WhereEncoding::of_mask(WhereVariant::none, m).values.empty());
    CHECK(WhereEncoding::of_mask(WhereVariant::bbox, BinaryMask(8, 8)).is_sentinel());
    CHECK(where_width(WhereVariant::bbox) == 4);
    CHECK(where_width(WhereVariant::centroid) == 2);
    CHECK(where_width(WhereVariant::none) == 0);
}

TEST_CASE("encode_scene: three objects in ten slots, widths per variant") {
    const auto f = three_objects();
    const auto ref = build_reference(f.image, f.masks, {});
    ColorHistogramProvider p;
    for (auto [variant, width] : {std::pair{WhereVariant::bbox, 220}, {WhereVariant::centroid, 218},
                                  {WhereVariant::none, 216}}) {
        const auto enc = encode_scene(ref, p, variant, f.image, f.masks);
        CHECK(enc.scene.k() == 10);
        CHECK(enc.scene.slot_width() == width);
        CHECK(static_cast<int>(enc.scene.flatten().size()) == 10 * width);
        int populated = 0;
        for (const auto& s : enc.scene.slots) populated += !s.empty();
        CHECK(populated == 3);
        CHECK(encode_scene(ref, p, variant, f.image, f.masks).scene == enc.scene);
    }
}

TEST_CASE("background invariance: pixels outside every mask do not touch any z") {
    auto f = three_objects();
    const auto ref = build_reference(f.image, f.masks, {});
    BinaryMask all(40, 40);
    for (const auto& m : f.masks) all = mask_union(all, m);
    for (auto kind : {ProviderKind::color_hist, ProviderKind::grad_orient, ProviderKind::patch}) {
        const auto p = make_builtin_provider(kind);
        const auto before = encode_scene(ref, *p, WhereVariant::bbox, f.image, f.masks).scene;
        Image changed = f.image;
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x)
                if (!all.get(x, y)) changed.set_pixel(x, y, 0.1f * (x % 3), 0.9f, 0.05f * (y % 5));
        CHECK(encode_scene(ref, *p, WhereVariant::bbox, changed, f.masks).scene == before);
    }
}

TEST_CASE("distractor locality: a new object only fills the slot it binds to") {
    auto f = three_objects();
    const auto ref = build_reference(f.image, f.masks, {});
    ColorHistogramProvider p;
    const auto before = encode_scene(ref, p, WhereVariant::bbox, f.image, f.masks).scene;
    Image img = f.image;
    BinaryMask extra(40, 40);
    fill_disk(img, extra, 32, 32, 3, 0.9f, 0.9f, 0.1f);
    auto masks = f.masks;
    masks.push_back(extra);
    const auto after = encode_scene(ref, p, WhereVariant::bbox, img, masks).scene;
    for (int s = 0; s < 3; ++s) CHECK(after.slots[s] == before.slots[s]);
}

TEST_CASE("scene flatten and cache round trip") {
    const auto f = three_objects();
    const auto ref = build_reference(f.image, f.masks, {});
    ColorHistogramProvider p;
    const auto scene = encode_scene(ref, p, WhereVariant::centroid, f.image, f.masks).scene;
    CHECK(SceneRepresentation::unflatten(10, 216, WhereVariant::centroid, scene.flatten()) == scene);

    const auto path = (std::filesystem::temp_directory_path() / "pocr_unit_cache.pocr").string();
    const std::vector<SceneRepresentation> frames = {scene, scene};
    write_scene_cache(path, frames);
    CHECK(read_scene_cache(path) == frames);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 6);
    CHECK_THROWS(read_scene_cache(path));
    std::filesystem::remove(path);
}

TEST_CASE("cosine distance and provider names") {
    const std::vector<float> a = {1, 0}, b = {0, 1}, z = {0, 0}, na = {-1, 0};
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
    CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
    CHECK(cosine_distance(a, na) == doctest::Approx(2.0));
    CHECK(cosine_distance(z, a) == 1.0);
    for (auto k : {ProviderKind::color_hist, ProviderKind::grad_orient, ProviderKind::patch, ProviderKind::remote})
        CHECK(parse_provider_kind(to_string(k)) == k);
    CHECK_THROWS(parse_provider_kind("dino"));
}
