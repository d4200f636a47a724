#include "pocr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace pocr {

Image::Image(int w, int h, float fill)
    : width(w), height(h), data(static_cast<size_t>(w) * h * kChannels, fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be non-negative");
}

void Image::set_pixel(int x, int y, float r, float g, float b) {
    at(x, y, 0) = r;
    at(x, y, 1) = g;
    at(x, y, 2) = b;
}

BinaryMask::BinaryMask(int w, int h, bool fill)
    : width(w), height(h), bits(static_cast<size_t>(w) * h, fill ? 1 : 0) {
    if (w < 0 || h < 0) throw std::invalid_argument("mask dimensions must be non-negative");
}

size_t BinaryMask::area() const {
    return static_cast<size_t>(std::count(bits.begin(), bits.end(), uint8_t{1}));
}

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": mask dimension mismatch");
}

}  // namespace

size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "intersection_area");
    size_t n = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) n += (a.bits[i] & b.bits[i]);
    return n;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "iou");
    size_t inter = 0;
    size_t uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        inter += (a.bits[i] & b.bits[i]);
        uni += (a.bits[i] | b.bits[i]);
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Image apply_mask(const Image& image, const BinaryMask& mask) {
    if (!mask.same_shape(image)) throw std::invalid_argument("apply_mask: dimension mismatch");
    Image out(image.width, image.height, 0.0f);
    for (size_t p = 0; p < mask.bits.size(); ++p) {
        if (!mask.bits[p]) continue;
        for (int c = 0; c < Image::kChannels; ++c) out.data[p * 3 + c] = image.data[p * 3 + c];
    }
    return out;
}

BoundingBox bbox_of_mask(const BinaryMask& mask) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.get(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return {};
    const auto w = static_cast<float>(mask.width);
    const auto h = static_cast<float>(mask.height);
    return {x0 / w, y0 / h, (x1 + 1) / w, (y1 + 1) / h};
}

Point2 centroid_of_mask(const BinaryMask& mask) {
    double sx = 0.0, sy = 0.0;
    size_t n = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.get(x, y)) continue;
            sx += x + 0.5;
            sy += y + 0.5;
            ++n;
        }
    }
    if (n == 0) return {};
    return {static_cast<float>(sx / n / mask.width), static_cast<float>(sy / n / mask.height)};
}

Image crop_resize(const Image& image, const BoundingBox& box, int side) {
    if (box.is_sentinel()) throw std::invalid_argument("crop_resize: sentinel box");
    if (side <= 0) throw std::invalid_argument("crop_resize: side must be positive");
    Image out(side, side);
    const double x0 = box.x_min * image.width;
    const double y0 = box.y_min * image.height;
    const double sx = (box.x_max - box.x_min) * image.width / side;
    const double sy = (box.y_max - box.y_min) * image.height / side;
    for (int j = 0; j < side; ++j) {
        const int src_y = std::clamp(static_cast<int>(std::floor(y0 + (j + 0.5) * sy)), 0, image.height - 1);
        for (int i = 0; i < side; ++i) {
            const int src_x = std::clamp(static_cast<int>(std::floor(x0 + (i + 0.5) * sx)), 0, image.width - 1);
            for (int c = 0; c < Image::kChannels; ++c) out.at(i, j, c) = image.at(src_x, src_y, c);
        }
    }
    return out;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "mask_union");
    BinaryMask out = a;
    for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] |= b.bits[i];
    return out;
}

BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "mask_difference");
    BinaryMask out = a;
    for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] &= static_cast<uint8_t>(!b.bits[i]);
    return out;
}

namespace {

// Square structuring element of the given radius.
BinaryMask morph(const BinaryMask& mask, int radius, bool grow) {
    if (radius <= 0) return mask;
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            bool any = false;
            bool all = true;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    const bool v = xx >= 0 && yy >= 0 && xx < mask.width && yy < mask.height && mask.get(xx, yy);
                    any = any || v;
                    all = all && v;
                }
            }
            out.set(x, y, grow ? any : all);
        }
    }
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, true); }
BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, false); }

BinaryMask translate(const BinaryMask& mask, int dx, int dy) {
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sy >= 0 && sx < mask.width && sy < mask.height) out.set(x, y, mask.get(sx, sy));
        }
    }
    return out;
}

Image translate(const Image& image, int dx, int dy) {
    Image out(image.width, image.height, 0.0f);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx < 0 || sy < 0 || sx >= image.width || sy >= image.height) continue;
            for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    return out;
}

std::string encode_rle(const BinaryMask& mask) {
    std::string out = std::to_string(mask.width) + " " + std::to_string(mask.height) + ";";
    if (mask.bits.empty()) return out + "0:";
    out += mask.bits.front() ? "1:" : "0:";
    size_t run = 0;
    uint8_t current = mask.bits.front();
    bool first = true;
    for (uint8_t b : mask.bits) {
        if (b == current) {
            ++run;
            continue;
        }
        if (!first) out += ',';
        out += std::to_string(run);
        first = false;
        current = b;
        run = 1;
    }
    if (!first) out += ',';
    out += std::to_string(run);
    return out;
}

namespace {

long parse_count(std::string_view s) {
    long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || v < 0) throw std::invalid_argument("rle: bad integer '" + std::string(s) + "'");
    return v;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

BinaryMask decode_rle(std::string_view text) {
    text = trim(text);
    const auto semi = text.find(';');
    if (semi == std::string_view::npos) throw std::invalid_argument("rle: missing ';'");
    const auto dims = text.substr(0, semi);
    const auto space = dims.find(' ');
    if (space == std::string_view::npos) throw std::invalid_argument("rle: missing dimensions");
    const long w = parse_count(dims.substr(0, space));
    const long h = parse_count(trim(dims.substr(space + 1)));
    auto body = text.substr(semi + 1);
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("rle: missing ':'");
    const auto v0 = body.substr(0, colon);
    if (v0 != "0" && v0 != "1") throw std::invalid_argument("rle: first value must be 0 or 1");
    BinaryMask mask(static_cast<int>(w), static_cast<int>(h));
    uint8_t value = v0 == "1" ? 1 : 0;
    body = body.substr(colon + 1);
    size_t pos = 0;
    while (!body.empty()) {
        const auto comma = body.find(',');
        const auto tok = body.substr(0, comma);
        const auto len = static_cast<size_t>(parse_count(tok));
        if (pos + len > mask.bits.size()) throw std::invalid_argument("rle: runs exceed W*H");
        std::fill_n(mask.bits.begin() + static_cast<long>(pos), len, value);
        pos += len;
        value ^= 1;
        if (comma == std::string_view::npos) break;
        body = body.substr(comma + 1);
    }
    if (pos != mask.bits.size()) throw std::invalid_argument("rle: total run length differs from W*H");
    return mask;
}

namespace {

std::vector<uint8_t> quantize(const Image& image) {
    std::vector<uint8_t> px(image.data.size());
    for (size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<uint8_t>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
    }
    return px;
}

Image dequantize(int w, int h, const std::vector<uint8_t>& px) {
    Image image(w, h);
    for (size_t i = 0; i < px.size(); ++i) image.data[i] = px[i] / 255.0f;
    return image;
}

struct PngImageGuard {
    png_image* img;
    ~PngImageGuard() { png_image_free(img); }
};

png_image make_png_image(const Image& image) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    return img;
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Image read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

std::vector<uint8_t> encode_png(const Image& image) {
    if (image.width == 0 || image.height == 0) throw std::invalid_argument("encode_png: empty image");
    png_image img = make_png_image(image);
    PngImageGuard guard{&img};
    const auto px = quantize(image);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png encode failed: ") + img.message);
    }
    std::vector<uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png encode failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(std::span<const uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    PngImageGuard guard{&img};
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw std::runtime_error(std::string("png decode failed: ") + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> px(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png decode failed: ") + img.message);
    }
    return dequantize(static_cast<int>(img.width), static_cast<int>(img.height), px);
}

}  // namespace pocr
