#include "pocr/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace pocr {

Labeling labeling_from_masks(std::span<const BinaryMask> masks, int width, int height) {
    Labeling l(width, height);
    for (size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].width != width || masks[i].height != height) throw std::invalid_argument("labeling: mask size mismatch");
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                if (!masks[i].get(x, y) || l.foreground.get(x, y)) continue;
                l.foreground.set(x, y);
                l.labels[static_cast<size_t>(y) * width + x] = static_cast<int>(i) + 1;
            }
    }
    return l;
}

namespace {
double choose2(double n) { return n * (n - 1.0) / 2.0; }
}  // namespace

double fg_ari(const Labeling& pred, const Labeling& gt) {
    if (pred.width != gt.width || pred.height != gt.height) throw std::invalid_argument("fg_ari: dimension mismatch");
    std::map<std::pair<int, int>, long> table;
    std::map<int, long> a, b;
    long n = 0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!gt.foreground.get(x, y)) continue;
            const int p = pred.at(x, y), g = gt.at(x, y);
            if (p < 0 || g < 0) throw std::invalid_argument("fg_ari: labels must be nonnegative");
            ++table[{g, p}];
            ++a[g];
            ++b[p];
            ++n;
        }
    if (n == 0) throw std::invalid_argument("fg_ari: empty ground-truth foreground");
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, c] : table) index += choose2(static_cast<double>(c));
    for (const auto& [k, c] : a) sa += choose2(static_cast<double>(c));
    for (const auto& [k, c] : b) sb += choose2(static_cast<double>(c));
    const double total = choose2(static_cast<double>(n));
    const double expected = total > 0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index - expected == 0.0) return 1.0;
    return (index - expected) / (max_index - expected);
}

std::vector<int> iou_match(std::span<const BinaryMask> rows, std::span<const BinaryMask> cols) {
    std::vector<int> out(rows.size(), -1);
    if (rows.empty() || cols.empty()) return out;
    CostMatrix cost(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    std::vector<double> ious(rows.size() * cols.size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < cols.size(); ++c) {
            const double v = (rows[r].empty() || cols[c].empty()) ? 0.0 : iou(rows[r], cols[c]);
            ious[r * cols.size() + c] = v;
            cost.at(static_cast<int>(r), static_cast<int>(c)) = 1.0 - v;
        }
    const auto match = solve_assignment(cost);
    for (size_t r = 0; r < rows.size(); ++r) {
        const int c = match[r];
        if (c >= 0 && ious[r * cols.size() + c] > 0.0) out[r] = c;
    }
    return out;
}

BindingReport binding_accuracy(std::span<const BinaryMask> ref_gt_masks, const ReferenceSlotSet& ref,
                               std::span<const BindingFrame> frames) {
    if (ref_gt_masks.empty()) throw std::invalid_argument("binding_accuracy: reference frame lacks GT masks");
    // slot -> entity via the reference frame
    const auto ent_to_slot = iou_match(ref_gt_masks, ref.ref_masks);
    std::vector<int> slot_entity(ref.k, -1);
    for (size_t e = 0; e < ent_to_slot.size(); ++e)
        if (ent_to_slot[e] >= 0 && !ref.excluded_slots.contains(ent_to_slot[e])) slot_entity[ent_to_slot[e]] = static_cast<int>(e);

    BindingReport rep;
    for (size_t f = 0; f < frames.size(); ++f) {
        const auto& fr = frames[f];
        if (fr.assignment.k() != ref.k) throw std::invalid_argument("binding_accuracy: assignment length differs from k");
        const auto ent_to_cand = iou_match(fr.gt_masks, fr.candidates);
        int correct = 0, total = 0;
        bool missing = false;
        for (int j = 0; j < ref.k; ++j) {
            const int e = slot_entity[j];
            if (e < 0) continue;
            ++total;
            const int want = e < static_cast<int>(ent_to_cand.size()) ? ent_to_cand[e] : -1;
            const auto got = fr.assignment.slot_to_candidate[j];
            if (!got) missing = true;
            if ((want < 0 && !got) || (got && *got == want)) ++correct;
        }
        rep.frame_correct.push_back(correct);
        rep.frame_total.push_back(total);
        if (missing) rep.frames_with_missing_slots.push_back(static_cast<int>(f));
        rep.correct += correct;
        rep.total += total;
    }
    rep.accuracy = rep.total > 0 ? static_cast<double>(rep.correct) / rep.total : 1.0;
    return rep;
}

nlohmann::json BindingReport::to_json() const {
    return {{"accuracy", accuracy},
            {"correct", correct},
            {"total", total},
            {"frames", frame_total.size()},
            {"frames_with_missing_slots", frames_with_missing_slots}};
}

SuccessStats success_stats(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("success_stats: need at least one seed");
    SuccessStats s;
    s.n = static_cast<int>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / s.n;
    if (s.n == 1) {
        s.single_seed = true;
        return s;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    return s;
}

}  // namespace pocr
