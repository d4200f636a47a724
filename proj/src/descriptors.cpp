#include "pocr/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pocr {

std::string to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::color_hist: return "color_hist";
        case ProviderKind::grad_orient: return "grad_orient";
        case ProviderKind::patch: return "patch";
        case ProviderKind::remote: return "remote";
    }
    return "unknown";
}

ProviderKind parse_provider_kind(const std::string& name) {
    if (name == "color_hist") return ProviderKind::color_hist;
    if (name == "grad_orient") return ProviderKind::grad_orient;
    if (name == "patch") return ProviderKind::patch;
    if (name == "remote") return ProviderKind::remote;
    throw std::invalid_argument("unknown provider kind: " + name);
}

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

namespace {

void l1_normalize(std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += x;
    if (s <= 0.0) return;
    for (auto& x : v) x = static_cast<float>(x / s);
}

}  // namespace

void l2_normalize(std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    if (s <= 0.0) return;
    const double n = std::sqrt(s);
    for (auto& x : v) x = static_cast<float>(x / n);
}

std::vector<float> ColorHistogramProvider::describe(const Image& image) const {
    constexpr int b = kBinsPerChannel;
    std::vector<float> hist(b * b * b, 0.0f);
    auto bin = [](float v) { return std::clamp(static_cast<int>(v * b), 0, b - 1); };
    for (size_t p = 0; p < image.pixel_count(); ++p) {
        const float r = image.data[p * 3], g = image.data[p * 3 + 1], bl = image.data[p * 3 + 2];
        if (r == 0.0f && g == 0.0f && bl == 0.0f) continue;
        hist[(bin(r) * b + bin(g)) * b + bin(bl)] += 1.0f;
    }
    l1_normalize(hist);
    return hist;
}

std::vector<float> GradientOrientationProvider::describe(const Image& image) const {
    std::vector<float> hist(kBins, 0.0f);
    const int w = image.width, h = image.height;
    if (w < 3 || h < 3) return hist;
    std::vector<float> gray(image.pixel_count());
    for (size_t p = 0; p < gray.size(); ++p) gray[p] = luma(image.data[p * 3], image.data[p * 3 + 1], image.data[p * 3 + 2]);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const float gx = gray[y * w + x + 1] - gray[y * w + x - 1];
            const float gy = gray[(y + 1) * w + x] - gray[(y - 1) * w + x];
            const float mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0f) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0.0) angle += std::numbers::pi;
            const int idx = std::min(kBins - 1, static_cast<int>(angle / std::numbers::pi * kBins));
            hist[idx] += mag;
        }
    }
    l1_normalize(hist);
    return hist;
}

std::vector<float> PatchProvider::describe(const Image& image) const {
    std::vector<float> sum(static_cast<size_t>(side_) * side_, 0.0f);
    std::vector<int> count(sum.size(), 0);
    for (int y = 0; y < image.height; ++y) {
        const int cy = y * side_ / image.height;
        for (int x = 0; x < image.width; ++x) {
            const int cx = x * side_ / image.width;
            sum[cy * side_ + cx] += luma(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
            ++count[cy * side_ + cx];
        }
    }
    for (size_t i = 0; i < sum.size(); ++i)
        if (count[i] > 0) sum[i] /= static_cast<float>(count[i]);
    return sum;
}

std::unique_ptr<DescriptorProvider> make_builtin_provider(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::color_hist: return std::make_unique<ColorHistogramProvider>();
        case ProviderKind::grad_orient: return std::make_unique<GradientOrientationProvider>();
        case ProviderKind::patch: return std::make_unique<PatchProvider>();
        case ProviderKind::remote: break;
    }
    throw std::invalid_argument("remote provider must be created through the adapter client");
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_distance: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

}  // namespace pocr
