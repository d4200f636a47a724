#include <doctest.h>

#include <random>

#include "pocr/byteio.hpp"
#include "pocr/imaging.hpp"

using namespace pocr;

namespace {

BinaryMask random_mask(std::mt19937& rng, int w, int h, double p) {
    std::bernoulli_distribution b(p);
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, b(rng));
    return m;
}

}  // namespace

TEST_CASE("iou: identity, disjoint and a hand-counted overlap") {
    BinaryMask a(4, 4), b(4, 4);
    a.set(0, 0);
    a.set(1, 0);
    CHECK(iou(a, a) == 1.0);
    b.set(3, 3);
    CHECK(iou(a, b) == 0.0);
    BinaryMask c(4, 4);
    c.set(1, 0);
    c.set(2, 0);
    CHECK(iou(a, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou is symmetric on random masks") {
    std::mt19937 rng(3);
    for (int i = 0; i < 50; ++i) {
        auto a = random_mask(rng, 9, 7, 0.4), b = random_mask(rng, 9, 7, 0.4);
        CHECK(iou(a, b) == iou(b, a));
        if (!a.empty()) CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("apply_mask") {
    Image img(4, 4);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1f + 0.01f * static_cast<float>(i);
    CHECK(apply_mask(img, BinaryMask(4, 4, true)) == img);
    const auto zero = apply_mask(img, BinaryMask(4, 4, false));
    for (float v : zero.data) CHECK(v == 0.0f);
    BinaryMask one(4, 4);
    one.set(2, 1);
    const auto single = apply_mask(img, one);
    int nonzero = 0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            if (single.at(x, y, 0) != 0 || single.at(x, y, 1) != 0 || single.at(x, y, 2) != 0) ++nonzero;
    CHECK(nonzero == 1);
    for (int c = 0; c < 3; ++c) CHECK(single.at(2, 1, c) == img.at(2, 1, c));
}

TEST_CASE("apply_mask never lights more pixels than the mask holds") {
    std::mt19937 rng(5);
    Image img(6, 5, 0.5f);
    img.set_pixel(1, 1, 0, 0, 0);
    for (int i = 0; i < 20; ++i) {
        const auto m = random_mask(rng, 6, 5, 0.5);
        const auto out = apply_mask(img, m);
        size_t lit = 0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 6; ++x) lit += out.at(x, y, 0) + out.at(x, y, 1) + out.at(x, y, 2) > 0;
        CHECK(lit <= m.area());
        CHECK(lit == m.area() - (m.get(1, 1) ? 1 : 0));
    }
}

TEST_CASE("bbox_of_mask: full, empty, single bit") {
    CHECK(bbox_of_mask(BinaryMask(8, 8, true)) == BoundingBox{0, 0, 1, 1});
    CHECK(bbox_of_mask(BinaryMask(8, 8)).is_sentinel());
    BinaryMask m(8, 8);
    m.set(2, 3);
    const auto b = bbox_of_mask(m);
    CHECK(b.x_min == doctest::Approx(0.25));
    CHECK(b.y_min == doctest::Approx(0.375));
    CHECK(b.x_max == doctest::Approx(0.375));
    CHECK(b.y_max == doctest::Approx(0.5));
}

TEST_CASE("bbox follows translation") {
    BinaryMask m(10, 8);
    m.set(2, 2);
    m.set(4, 3);
    const auto b0 = bbox_of_mask(m);
    const auto b1 = bbox_of_mask(translate(m, 3, 2));
    CHECK(b1.x_min == doctest::Approx(b0.x_min + 0.3));
    CHECK(b1.x_max == doctest::Approx(b0.x_max + 0.3));
    CHECK(b1.y_min == doctest::Approx(b0.y_min + 0.25));
    CHECK(b1.y_max == doctest::Approx(b0.y_max + 0.25));
}

TEST_CASE("centroid_of_mask") {
    const auto full = centroid_of_mask(BinaryMask(6, 4, true));
    CHECK(full.x == doctest::Approx(0.5));
    CHECK(full.y == doctest::Approx(0.5));
    BinaryMask m(2, 2);
    m.set(0, 0);
    CHECK(centroid_of_mask(m) == Point2{0.25f, 0.25f});
    CHECK(centroid_of_mask(BinaryMask(3, 3)) == Point2{0, 0});
}

TEST_CASE("crop_resize") {
    Image img(4, 4);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 7) / 7.0f;
    CHECK(crop_resize(img, {0, 0, 1, 1}, 4) == img);

    Image uni(5, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x) uni.set_pixel(x, y, 0.2f, 0.4f, 0.6f);
    const auto u = crop_resize(uni, {0.1f, 0.2f, 0.7f, 0.9f}, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) CHECK(u.at(x, y, 1) == 0.4f);

    Image quad(2, 2);
    quad.set_pixel(0, 0, 1, 0, 0);
    quad.set_pixel(1, 0, 0, 1, 0);
    quad.set_pixel(0, 1, 0, 0, 1);
    quad.set_pixel(1, 1, 1, 1, 1);
    const auto q = crop_resize(quad, {0.5f, 0.0f, 1.0f, 0.5f}, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(q.at(x, y, 0) == 0.0f);
            CHECK(q.at(x, y, 1) == 1.0f);
        }
}

TEST_CASE("rle round trip and malformed input") {
    std::mt19937 rng(11);
    for (int i = 0; i < 30; ++i) {
        const auto m = random_mask(rng, 1 + i % 9, 1 + i % 5, 0.3);
        CHECK(decode_rle(encode_rle(m)) == m);
    }
    CHECK_THROWS(decode_rle("3 3;0:4,4"));
    CHECK_THROWS(decode_rle("garbage"));
}

TEST_CASE("png round trip is exact on 8-bit values") {
    Image img(7, 5);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>((i * 37) % 256) / 255.0f;
    const auto bytes = encode_png(img);
    CHECK(decode_png(bytes) == img);
    std::vector<uint8_t> broken(bytes.begin(), bytes.begin() + 20);
    CHECK_THROWS(decode_png(broken));
}

TEST_CASE("base64 and crc32 against known vectors") {
    const std::string s = "foobar";
    const std::vector<uint8_t> bytes(s.begin(), s.end());
    CHECK(byteio::base64_encode(bytes) == "Zm9vYmFy");
    CHECK(byteio::base64_decode("Zm9vYg==") == std::vector<uint8_t>{'f', 'o', 'o', 'b'});
    const std::string check = "123456789";
    CHECK(byteio::crc32_of(std::vector<uint8_t>(check.begin(), check.end())) == 0xCBF43926u);
}
