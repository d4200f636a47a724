#include "pocr/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pocr {

int SlotAssignment::filled() const {
    return static_cast<int>(std::count_if(slot_to_candidate.begin(), slot_to_candidate.end(),
                                          [](const auto& c) { return c.has_value(); }));
}

std::vector<int> solve_assignment(const CostMatrix& cost) {
    if (cost.rows < 0 || cost.cols < 0 || cost.entries.size() != static_cast<size_t>(cost.rows) * cost.cols) {
        throw std::invalid_argument("cost matrix shape is inconsistent");
    }
    for (double v : cost.entries) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("cost matrix entries must be finite and >= 0");
    }
    const int n = std::max(cost.rows, cost.cols);
    if (n == 0) return {};
    auto c = [&](int r, int col) {
        return (r < cost.rows && col < cost.cols) ? cost.at(r, col) : kAssignmentPadCost;
    };

    // Row potentials u, column potentials v, 1-based with 0 as the virtual root.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> col_owner(n + 1, 0), way(n + 1, 0);
    std::vector<double> min_slack(n + 1);
    std::vector<char> visited(n + 1);

    for (int row = 1; row <= n; ++row) {
        col_owner[0] = row;
        int col0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), inf);
        std::fill(visited.begin(), visited.end(), 0);
        do {
            visited[col0] = 1;
            const int r0 = col_owner[col0];
            double delta = inf;
            int col1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (visited[j]) continue;
                const double reduced = c(r0 - 1, j - 1) - u[r0] - v[j];
                if (reduced < min_slack[j]) {
                    min_slack[j] = reduced;
                    way[j] = col0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    col1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (visited[j]) {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col0 = col1;
        } while (col_owner[col0] != 0);
        // Augment along the alternating path.
        do {
            const int col1 = way[col0];
            col_owner[col0] = col_owner[col1];
            col0 = col1;
        } while (col0 != 0);
    }

    std::vector<int> row_to_col(cost.rows, -1);
    for (int j = 1; j <= n; ++j) {
        const int r = col_owner[j] - 1;
        if (r < cost.rows && j - 1 < cost.cols) row_to_col[r] = j - 1;
    }
    return row_to_col;
}

SlotAssignment hungarian(const CostMatrix& cost) {
    const auto row_to_col = solve_assignment(cost);
    SlotAssignment out;
    out.slot_to_candidate.assign(cost.cols, std::nullopt);
    for (int r = 0; r < cost.rows; ++r) {
        if (row_to_col[r] >= 0) out.slot_to_candidate[row_to_col[r]] = r;
    }
    return out;
}

double assignment_cost(const CostMatrix& cost, const SlotAssignment& a) {
    double total = 0.0;
    for (int j = 0; j < a.k(); ++j) {
        if (a.slot_to_candidate[j]) total += cost.at(*a.slot_to_candidate[j], j);
    }
    return total;
}

}  // namespace pocr
