#include "pocr/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pocr {

namespace {

using Feature = BackgroundModel::Feature;

Feature pixel_feature(const Image& image, int x, int y, float pw) {
    return {image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2),
            pw * (x + 0.5f) / static_cast<float>(image.width), pw * (y + 0.5f) / static_cast<float>(image.height)};
}

float sq_dist(const Feature& a, const Feature& b) {
    float d = 0.0f;
    for (size_t i = 0; i < a.size(); ++i) {
        const float t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

// Greedy k-means++: each round samples 2 + ln(k) candidates by D^2 and
// keeps the one that lowers the total potential most.
std::vector<Feature> kmeans_plus_plus(const std::vector<Feature>& points, int k, std::mt19937_64& rng) {
    std::vector<Feature> centers;
    centers.reserve(k);
    std::uniform_int_distribution<size_t> pick(0, points.size() - 1);
    centers.push_back(points[pick(rng)]);
    std::vector<double> d2(points.size());
    for (size_t i = 0; i < points.size(); ++i) d2[i] = sq_dist(points[i], centers[0]);
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
    std::vector<double> cand_d2(points.size()), best_d2(points.size());
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> cumulative(d2.size());
        std::partial_sum(d2.begin(), d2.end(), cumulative.begin());
        const double total = cumulative.back();
        double best_potential = std::numeric_limits<double>::infinity();
        size_t best = pick(rng);
        for (int t = 0; t < trials; ++t) {
            size_t chosen = pick(rng);
            if (total > 0.0) {
                std::uniform_real_distribution<double> u(0.0, total);
                chosen = std::min(points.size() - 1, static_cast<size_t>(std::lower_bound(cumulative.begin(), cumulative.end(), u(rng)) - cumulative.begin()));
            }
            double potential = 0.0;
            for (size_t i = 0; i < points.size(); ++i) {
                cand_d2[i] = std::min<double>(d2[i], sq_dist(points[i], points[chosen]));
                potential += cand_d2[i];
            }
            if (potential < best_potential) {
                best_potential = potential;
                best = chosen;
                best_d2.swap(cand_d2);
            }
        }
        centers.push_back(points[best]);
        if (std::isfinite(best_potential)) d2.swap(best_d2);
    }
    return centers;
}

}  // namespace

int BackgroundModel::nearest(const Feature& f) const {
    int best = 0;
    float best_d = std::numeric_limits<float>::max();
    for (size_t c = 0; c < centers.size(); ++c) {
        const float d = sq_dist(f, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

BackgroundModel fit_background(std::span<const Image> refs, const KMeansOptions& opts) {
    if (refs.empty()) throw std::invalid_argument("fit_background: no reference images");
    if (opts.n_clusters < 2) throw std::invalid_argument("fit_background: n_clusters must be >= 2");

    std::vector<Feature> points;
    for (const auto& img : refs) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) points.push_back(pixel_feature(img, x, y, static_cast<float>(opts.position_weight)));
    }
    if (points.empty()) throw std::invalid_argument("fit_background: reference images are empty");

    BackgroundModel model;
    model.seed = opts.seed;
    model.n_clusters = opts.n_clusters;
    model.position_weight = opts.position_weight;
    std::mt19937_64 rng(opts.seed);
    std::vector<int> label(points.size(), 0);
    double best_inertia = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, opts.n_init); ++restart) {
        BackgroundModel trial = model;
        trial.centers = kmeans_plus_plus(points, opts.n_clusters, rng);
        for (int iter = 0; iter < opts.max_iterations; ++iter) {
            for (size_t i = 0; i < points.size(); ++i) label[i] = trial.nearest(points[i]);
            std::vector<std::array<double, 5>> sums(trial.centers.size(), std::array<double, 5>{});
            std::vector<size_t> counts(trial.centers.size(), 0);
            for (size_t i = 0; i < points.size(); ++i) {
                for (size_t d = 0; d < 5; ++d) sums[label[i]][d] += points[i][d];
                ++counts[label[i]];
            }
            double max_move = 0.0;
            for (size_t c = 0; c < trial.centers.size(); ++c) {
                if (counts[c] == 0) continue;  // keep the previous center
                Feature next{};
                for (size_t d = 0; d < 5; ++d) next[d] = static_cast<float>(sums[c][d] / counts[c]);
                max_move = std::max(max_move, std::sqrt(static_cast<double>(sq_dist(next, trial.centers[c]))));
                trial.centers[c] = next;
            }
            if (max_move < opts.tolerance) break;
        }
        double inertia = 0.0;
        for (const auto& p : points) inertia += sq_dist(p, trial.centers[trial.nearest(p)]);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            model.centers = std::move(trial.centers);
        }
    }

    // Background vote: a cluster is background when its pixels touch the
    // border in at least half of the reference images.
    std::vector<size_t> touches(model.centers.size(), 0);
    for (const auto& img : refs) {
        std::vector<char> touched(model.centers.size(), 0);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (x != 0 && y != 0 && x != img.width - 1 && y != img.height - 1) continue;
                touched[model.nearest(pixel_feature(img, x, y, static_cast<float>(model.position_weight)))] = 1;
            }
        }
        for (size_t c = 0; c < touched.size(); ++c) touches[c] += touched[c];
    }
    model.background.resize(model.centers.size());
    for (size_t c = 0; c < touches.size(); ++c) model.background[c] = 2 * touches[c] >= refs.size();

    // No colour variation at all means there is no foreground to find.
    double color_var = 0.0;
    {
        std::array<double, 3> mean{};
        for (const auto& p : points)
            for (int d = 0; d < 3; ++d) mean[d] += p[d];
        for (auto& m : mean) m /= static_cast<double>(points.size());
        for (const auto& p : points)
            for (int d = 0; d < 3; ++d) color_var += (p[d] - mean[d]) * (p[d] - mean[d]);
        color_var /= static_cast<double>(points.size());
    }
    if (color_var < 1e-10) std::fill(model.background.begin(), model.background.end(), true);

    const auto n_bg = std::count(model.background.begin(), model.background.end(), true);
    model.degenerate = n_bg == 0 || n_bg == static_cast<long>(model.background.size());
    return model;
}

BinaryMask background_mask(const BackgroundModel& model, const Image& image) {
    if (model.degenerate) throw std::invalid_argument("background_mask: degenerate background model");
    BinaryMask mask(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) mask.set(x, y, model.background[model.nearest(pixel_feature(image, x, y, static_cast<float>(model.position_weight)))]);
    return mask;
}

nlohmann::json to_json(const BackgroundModel& model) {
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : model.centers) centers.push_back(std::vector<float>(c.begin(), c.end()));
    return {{"feature_kind", "color5"},
            {"centers", centers},
            {"flags", model.background},
            {"degenerate", model.degenerate},
            {"seed", model.seed},
            {"n_clusters", model.n_clusters},
            {"position_weight", model.position_weight}};
}

BackgroundModel background_model_from_json(const nlohmann::json& j) {
    if (j.at("feature_kind").get<std::string>() != "color5") throw std::invalid_argument("unknown feature_kind");
    BackgroundModel m;
    for (const auto& c : j.at("centers")) {
        const auto v = c.get<std::vector<float>>();
        if (v.size() != 5) throw std::invalid_argument("background center must have 5 values");
        m.centers.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    m.background = j.at("flags").get<std::vector<bool>>();
    m.seed = j.at("seed").get<uint64_t>();
    m.n_clusters = j.at("n_clusters").get<int>();
    m.degenerate = j.value("degenerate", false);
    m.position_weight = j.value("position_weight", 1.0);
    if (m.background.size() != m.centers.size()) throw std::invalid_argument("flags and centers differ in length");
    return m;
}

ProposalSet make_proposal_set(std::vector<BinaryMask> masks, const BinaryMask& bg) {
    ProposalSet set;
    set.foreground_areas.reserve(masks.size());
    for (const auto& m : masks) {
        if (!m.same_shape(bg)) throw std::invalid_argument("make_proposal_set: dimension mismatch");
        set.foreground_areas.push_back(m.area() - intersection_area(m, bg));
    }
    set.masks = std::move(masks);
    return set;
}

std::vector<size_t> screen_proposal_indices(const ProposalSet& proposals, const BinaryMask& bg,
                                            const ScreeningThresholds& taus) {
    if (proposals.foreground_areas.size() != proposals.masks.size()) {
        throw std::invalid_argument("screen_proposals: foreground areas not aligned with masks");
    }
    for (const auto& m : proposals.masks) {
        if (!m.same_shape(bg)) throw std::invalid_argument("screen_proposals: dimension mismatch");
    }
    std::vector<size_t> order(proposals.masks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return proposals.foreground_areas[a] > proposals.foreground_areas[b];
    });

    std::vector<size_t> accepted;
    BinaryMask taken(bg.width, bg.height);
    for (size_t idx : order) {
        const auto& m = proposals.masks[idx];
        const auto area = static_cast<double>(m.area());
        if (area == 0.0) continue;
        const double overlap = static_cast<double>(intersection_area(m, taken)) / area;
        const double bg_overlap = static_cast<double>(intersection_area(m, bg)) / area;
        if (overlap <= taus.tau_overlap && bg_overlap <= taus.tau_bg) {
            accepted.push_back(idx);
            for (size_t i = 0; i < taken.bits.size(); ++i) taken.bits[i] |= m.bits[i];
        }
    }
    return accepted;
}

std::vector<BinaryMask> screen_proposals(const ProposalSet& proposals, const BinaryMask& bg,
                                         const ScreeningThresholds& taus) {
    std::vector<BinaryMask> out;
    for (size_t idx : screen_proposal_indices(proposals, bg, taus)) out.push_back(proposals.masks[idx]);
    return out;
}

}  // namespace pocr
