#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocr/imaging.hpp"

namespace pocr {

enum class FeatureKind { color5 };

/// K-means model over per-pixel (r, g, b, x/W, y/H) features with a
/// background flag per cluster.
struct BackgroundModel {
    using Feature = std::array<float, 5>;

    FeatureKind feature_kind = FeatureKind::color5;
    std::vector<Feature> centers;
    std::vector<bool> background;
    bool degenerate = false;
    uint64_t seed = 0;
    int n_clusters = 0;
    double position_weight = 1.0;  // scale of the x/W, y/H features

    int nearest(const Feature& f) const;
    bool operator==(const BackgroundModel&) const = default;
};

struct KMeansOptions {
    int n_clusters = 8;
    double position_weight = 1.0;
    int max_iterations = 50;
    int n_init = 4;  // k-means++ restarts; the lowest inertia wins
    double tolerance = 1e-4;
    uint64_t seed = 0;
};

BackgroundModel fit_background(std::span<const Image> refs, const KMeansOptions& opts = {});

/// True where the nearest cluster is flagged background.
BinaryMask background_mask(const BackgroundModel& model, const Image& image);

nlohmann::json to_json(const BackgroundModel& model);
BackgroundModel background_model_from_json(const nlohmann::json& j);

struct ProposalSet {
    std::vector<BinaryMask> masks;
    std::vector<size_t> foreground_areas;
};

/// Attaches foreground areas (bits outside bg) to raw proposals.
ProposalSet make_proposal_set(std::vector<BinaryMask> masks, const BinaryMask& bg);

struct ScreeningThresholds {
    double tau_overlap = 0.05;
    double tau_bg = 0.75;
};

/// Greedy NMS by decreasing foreground area (stable on ties). Returns the
/// indices of accepted proposals in selection order.
std::vector<size_t> screen_proposal_indices(const ProposalSet& proposals, const BinaryMask& bg,
                                            const ScreeningThresholds& taus = {});

std::vector<BinaryMask> screen_proposals(const ProposalSet& proposals, const BinaryMask& bg,
                                         const ScreeningThresholds& taus = {});

}  // namespace pocr
