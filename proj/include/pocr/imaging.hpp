#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pocr {

/// RGB image, row-major, interleaved channels, intensities in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    static constexpr int kChannels = 3;

    Image() = default;
    Image(int w, int h, float fill = 0.0f);

    float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * kChannels + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * kChannels + c]; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    void set_pixel(int x, int y, float r, float g, float b);
    bool operator==(const Image&) const = default;
};

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false);

    bool get(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t area() const;
    bool empty() const { return area() == 0; }
    bool same_shape(const BinaryMask& o) const { return width == o.width && height == o.height; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
    bool operator==(const BinaryMask&) const = default;
};

/// Normalized axis-aligned box. (0,0,0,0) is the empty-slot sentinel.
struct BoundingBox {
    float x_min = 0.0f;
    float y_min = 0.0f;
    float x_max = 0.0f;
    float y_max = 0.0f;

    bool is_sentinel() const { return x_min == 0.0f && y_min == 0.0f && x_max == 0.0f && y_max == 0.0f; }
    bool operator==(const BoundingBox&) const = default;
};

struct Point2 {
    float x = 0.0f;
    float y = 0.0f;
    bool operator==(const Point2&) const = default;
};

double iou(const BinaryMask& a, const BinaryMask& b);
size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

Image apply_mask(const Image& image, const BinaryMask& mask);

// Half-open pixel-edge convention: column c spans [c/W, (c+1)/W).
BoundingBox bbox_of_mask(const BinaryMask& mask);
Point2 centroid_of_mask(const BinaryMask& mask);

/// Nearest-neighbour resample of the box region to side x side.
Image crop_resize(const Image& image, const BoundingBox& box, int side);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);
/// Shift by (dx,dy) pixels; bits shifted off the edge are lost.
BinaryMask translate(const BinaryMask& mask, int dx, int dy);
Image translate(const Image& image, int dx, int dy);

/// Run-length text encoding: "W H;v0:len0,len1,...".
std::string encode_rle(const BinaryMask& mask);
BinaryMask decode_rle(std::string_view text);

// PNG I/O quantizes to 8 bits per channel.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);
std::vector<uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const uint8_t> bytes);

}  // namespace pocr
