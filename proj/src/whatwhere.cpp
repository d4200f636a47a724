#include "pocr/whatwhere.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "pocr/byteio.hpp"

namespace pocr {

std::string to_string(WhereVariant v) {
    switch (v) {
        case WhereVariant::bbox: return "bbox";
        case WhereVariant::centroid: return "centroid";
        case WhereVariant::none: return "none";
    }
    return "unknown";
}

WhereVariant parse_where_variant(const std::string& name) {
    if (name == "bbox") return WhereVariant::bbox;
    if (name == "centroid") return WhereVariant::centroid;
    if (name == "none") return WhereVariant::none;
    throw std::invalid_argument("unknown where variant: " + name);
}

int where_width(WhereVariant v) {
    switch (v) {
        case WhereVariant::bbox: return 4;
        case WhereVariant::centroid: return 2;
        case WhereVariant::none: return 0;
    }
    return 0;
}

WhereEncoding WhereEncoding::of_mask(WhereVariant variant, const BinaryMask& mask) {
    WhereEncoding w{variant, {}};
    if (variant == WhereVariant::bbox) {
        const auto b = bbox_of_mask(mask);
        w.values = {b.x_min, b.y_min, b.x_max, b.y_max};
    } else if (variant == WhereVariant::centroid) {
        const auto c = centroid_of_mask(mask);
        w.values = {c.x, c.y};
    }
    return w;
}

bool WhereEncoding::is_sentinel() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
}

bool Slot::empty() const {
    return where.is_sentinel() && std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; });
}

std::vector<float> SceneRepresentation::flatten() const {
    std::vector<float> out;
    out.reserve(static_cast<size_t>(k()) * slot_width());
    for (const auto& s : slots) {
        out.insert(out.end(), s.z.begin(), s.z.end());
        out.insert(out.end(), s.where.values.begin(), s.where.values.end());
    }
    return out;
}

SceneRepresentation SceneRepresentation::unflatten(int k, int dimension, WhereVariant variant,
                                                   std::span<const float> flat) {
    SceneRepresentation s{dimension, variant, {}};
    const int w = s.slot_width();
    if (flat.size() != static_cast<size_t>(k) * w) throw std::invalid_argument("unflatten: size mismatch");
    for (int i = 0; i < k; ++i) {
        const auto row = flat.subspan(static_cast<size_t>(i) * w, w);
        Slot slot;
        slot.index = i;
        slot.z.assign(row.begin(), row.begin() + dimension);
        slot.where = {variant, std::vector<float>(row.begin() + dimension, row.end())};
        s.slots.push_back(std::move(slot));
    }
    return s;
}

std::vector<float> slot_vector(const DescriptorProvider& provider, const Image& image, const BinaryMask& mask) {
    if (!mask.same_shape(image)) throw std::invalid_argument("slot_vector: dimension mismatch");
    if (mask.empty()) return std::vector<float>(provider.dimension(), 0.0f);
    auto z = provider.describe(apply_mask(image, mask));
    if (static_cast<int>(z.size()) != provider.dimension()) {
        throw std::runtime_error("descriptor provider returned " + std::to_string(z.size()) + " values, expected " +
                                 std::to_string(provider.dimension()));
    }
    return z;
}

SceneRepresentation encode_slots(const DescriptorProvider& provider, WhereVariant variant, const Image& image,
                                 std::span<const BinaryMask> slot_masks) {
    SceneRepresentation scene{provider.dimension(), variant, {}};
    for (size_t i = 0; i < slot_masks.size(); ++i) {
        Slot s;
        s.index = static_cast<int>(i);
        s.where = WhereEncoding::of_mask(variant, slot_masks[i]);
        s.z = slot_vector(provider, image, slot_masks[i]);
        scene.slots.push_back(std::move(s));
    }
    return scene;
}

EncodedFrame encode_scene(const ReferenceSlotSet& ref, const DescriptorProvider& provider, WhereVariant variant,
                          const Image& image, std::span<const BinaryMask> screened, const BindOptions& opts) {
    EncodedFrame out;
    out.binding = bind_frame(ref, image, screened, opts);
    out.scene = encode_slots(provider, variant, image, out.binding.slot_masks);
    return out;
}

namespace {

constexpr char kCacheMagic[4] = {'P', 'O', 'C', 'R'};
constexpr uint32_t kCacheVersion = 1;

uint32_t variant_code(WhereVariant v) { return static_cast<uint32_t>(v); }

WhereVariant variant_from_code(uint32_t c) {
    if (c > 2) throw std::runtime_error("cache: bad where variant code");
    return static_cast<WhereVariant>(c);
}

}  // namespace

void write_scene_cache(const std::string& path, std::span<const SceneRepresentation> frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int k = frames.empty() ? 0 : frames.front().k();
    const int d = frames.empty() ? 0 : frames.front().dimension;
    const auto variant = frames.empty() ? WhereVariant::bbox : frames.front().variant;
    out.write(kCacheMagic, 4);
    byteio::put_u32(out, kCacheVersion);
    byteio::put_u32(out, static_cast<uint32_t>(k));
    byteio::put_u32(out, static_cast<uint32_t>(d));
    byteio::put_u32(out, variant_code(variant));
    byteio::put_u32(out, static_cast<uint32_t>(frames.size()));
    for (const auto& f : frames) {
        if (f.k() != k || f.dimension != d || f.variant != variant) throw std::invalid_argument("cache: mixed layouts");
        byteio::put_f32s(out, f.flatten());
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<SceneRepresentation> read_scene_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCacheMagic)) throw std::runtime_error("cache: bad magic");
    if (byteio::get_u32(in) != kCacheVersion) throw std::runtime_error("cache: unsupported version");
    const int k = static_cast<int>(byteio::get_u32(in));
    const int d = static_cast<int>(byteio::get_u32(in));
    const auto variant = variant_from_code(byteio::get_u32(in));
    const auto n = byteio::get_u32(in);
    std::vector<SceneRepresentation> frames;
    const size_t per_frame = static_cast<size_t>(k) * (d + where_width(variant));
    for (uint32_t i = 0; i < n; ++i) {
        const auto flat = byteio::get_f32s(in, per_frame);
        frames.push_back(SceneRepresentation::unflatten(k, d, variant, flat));
    }
    return frames;
}

}  // namespace pocr
