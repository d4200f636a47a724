#pragma once

#include <optional>
#include <vector>

namespace pocr {

/// Dense rows x cols cost matrix; rows are candidates, columns are slots.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> entries;

    CostMatrix() = default;
    CostMatrix(int r, int c, double fill = 0.0) : rows(r), cols(c), entries(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return entries[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return entries[static_cast<size_t>(r) * cols + c]; }
};

struct SlotAssignment {
    std::vector<std::optional<int>> slot_to_candidate;

    int k() const { return static_cast<int>(slot_to_candidate.size()); }
    int filled() const;
    bool operator==(const SlotAssignment&) const = default;
};

/// Padding value for rectangular problems; above the largest cosine distance.
inline constexpr double kAssignmentPadCost = 10.0;

/// Minimum-cost assignment of rows to columns (shortest augmenting path,
/// Jonker-Volgenant style, O(n^3)). Rectangular inputs are padded to square
/// with kAssignmentPadCost. Returns, per row, the assigned column or -1.
/// Throws std::invalid_argument on NaN, infinite or negative entries.
std::vector<int> solve_assignment(const CostMatrix& cost);

/// Slot view of solve_assignment: column j receives its matched row, or
/// nothing when it was matched to padding.
SlotAssignment hungarian(const CostMatrix& cost);

double assignment_cost(const CostMatrix& cost, const SlotAssignment& a);

}  // namespace pocr
