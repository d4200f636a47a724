#include "pocr/binding.hpp"

#include <stdexcept>

namespace pocr {

std::vector<float> matching_descriptor(const Image& image, const BinaryMask& mask, int side,
                                       const DescriptorProvider* matcher) {
    if (mask.empty()) throw std::invalid_argument("matching_descriptor: empty mask");
    const Image crop = crop_resize(apply_mask(image, mask), bbox_of_mask(mask), side);
    if (matcher != nullptr) return matcher->describe(crop);
    std::vector<float> v = crop.data;
    l2_normalize(v);
    return v;
}

ReferenceSlotSet build_reference(const Image& ref_image, std::span<const BinaryMask> screened,
                                 std::span<const BinaryMask> exclusions, const ReferenceOptions& opts) {
    if (screened.empty()) throw std::invalid_argument("build_reference: no screened masks");
    ReferenceSlotSet ref;
    ref.k = opts.k;
    ref.match_side = opts.match_side;
    ref.excluded_slots = opts.excluded_slots;
    ref.matcher = opts.matcher;
    for (const auto& m : screened) {
        bool drop = false;
        for (const auto& ex : exclusions) drop = drop || iou(m, ex) > opts.exclusion_iou;
        if (!drop) ref.ref_masks.push_back(m);
    }
    if (static_cast<int>(ref.ref_masks.size()) > ref.k) {
        throw std::invalid_argument("build_reference: " + std::to_string(ref.ref_masks.size()) +
                                    " masks survive screening but k = " + std::to_string(ref.k));
    }
    for (const auto& m : ref.ref_masks) ref.ref_descriptors.push_back(matching_descriptor(ref_image, m, ref.match_side, ref.matcher));
    return ref;
}

BindResult bind_frame(const ReferenceSlotSet& ref, const Image& image, std::span<const BinaryMask> screened,
                      const BindOptions& opts) {
    for (const auto& m : screened) {
        if (!m.same_shape(image)) throw std::invalid_argument("bind_frame: mask/image dimension mismatch");
    }
    std::vector<std::vector<float>> cand;
    std::vector<int> cand_index;
    for (size_t i = 0; i < screened.size(); ++i) {
        if (screened[i].empty()) continue;
        cand.push_back(matching_descriptor(image, screened[i], ref.match_side, ref.matcher));
        cand_index.push_back(static_cast<int>(i));
    }

    BindResult out;
    out.costs = CostMatrix(static_cast<int>(screened.size()), ref.k, kAssignmentPadCost);
    CostMatrix solve(static_cast<int>(cand.size()), ref.k);
    for (size_t r = 0; r < cand.size(); ++r) {
        for (int j = 0; j < ref.k; ++j) {
            double c;
            if (ref.excluded_slots.contains(j)) {
                c = kAssignmentPadCost;
            } else if (j < ref.filled()) {
                c = cosine_distance(cand[r], ref.ref_descriptors[j]);
            } else {
                c = 1.0;  // empty reference slot: zero descriptor
            }
            solve.at(static_cast<int>(r), j) = c;
            out.costs.at(cand_index[r], j) = c;
        }
    }

    const SlotAssignment compact = hungarian(solve);
    out.assignment.slot_to_candidate.assign(ref.k, std::nullopt);
    out.slot_masks.assign(ref.k, BinaryMask(image.width, image.height));
    for (int j = 0; j < ref.k; ++j) {
        const auto r = compact.slot_to_candidate[j];
        if (!r || ref.excluded_slots.contains(j)) continue;
        if (opts.tau_match && solve.at(*r, j) > *opts.tau_match) continue;
        out.assignment.slot_to_candidate[j] = cand_index[*r];
        out.slot_masks[j] = screened[cand_index[*r]];
    }
    return out;
}

nlohmann::json assignment_record(int frame, const BindResult& result) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& c : result.assignment.slot_to_candidate) {
        slots.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
    }
    nlohmann::json costs = nlohmann::json::array();
    for (int r = 0; r < result.costs.rows; ++r) {
        std::vector<double> row(result.costs.entries.begin() + static_cast<long>(r) * result.costs.cols,
                                result.costs.entries.begin() + static_cast<long>(r + 1) * result.costs.cols);
        costs.push_back(row);
    }
    return {{"frame", frame}, {"slot_to_candidate", slots}, {"costs", costs}};
}

}  // namespace pocr
