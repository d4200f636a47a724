#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pocr/imaging.hpp"

namespace pocr {

enum class ProviderKind { color_hist, grad_orient, patch, remote };

std::string to_string(ProviderKind kind);
ProviderKind parse_provider_kind(const std::string& name);

/// "What" descriptor over an image. Implementations are immutable after
/// construction and must return vectors of exactly dimension() floats.
class DescriptorProvider {
public:
    virtual ~DescriptorProvider() = default;
    virtual ProviderKind kind() const = 0;
    virtual int dimension() const = 0;
    virtual std::vector<float> describe(const Image& image) const = 0;
};

/// 6x6x6 RGB histogram over nonzero pixels, L1-normalized (D = 216).
class ColorHistogramProvider final : public DescriptorProvider {
public:
    static constexpr int kBinsPerChannel = 6;
    ProviderKind kind() const override { return ProviderKind::color_hist; }
    int dimension() const override { return kBinsPerChannel * kBinsPerChannel * kBinsPerChannel; }
    std::vector<float> describe(const Image& image) const override;
};

/// 9-bin unsigned gradient-orientation histogram on luma, magnitude
/// weighted, L1-normalized.
class GradientOrientationProvider final : public DescriptorProvider {
public:
    static constexpr int kBins = 9;
    ProviderKind kind() const override { return ProviderKind::grad_orient; }
    int dimension() const override { return kBins; }
    std::vector<float> describe(const Image& image) const override;
};

/// side x side block-average luma downsample (D = side^2, default 256).
class PatchProvider final : public DescriptorProvider {
public:
    explicit PatchProvider(int side = 16) : side_(side) {}
    ProviderKind kind() const override { return ProviderKind::patch; }
    int dimension() const override { return side_ * side_; }
    std::vector<float> describe(const Image& image) const override;

private:
    int side_;
};

std::unique_ptr<DescriptorProvider> make_builtin_provider(ProviderKind kind);

float luma(float r, float g, float b);

/// Cosine distance in [0,2]; 1 when either vector is zero.
double cosine_distance(std::span<const float> a, std::span<const float> b);

void l2_normalize(std::vector<float>& v);

}  // namespace pocr
