#pragma once

#include <limits>
#include <vector>

#include "schemaflow/error.hpp"

namespace schemaflow {

/// Minimum-cost assignment of every row to a distinct column (rows ≤ columns),
/// by the shortest-augmenting-path Hungarian method with potentials, O(n²m).
/// Returns the column of each row.
template <class T>
std::vector<int> solve_assignment(const std::vector<std::vector<T>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const int m = static_cast<int>(cost[0].size());
    require(n <= m, "solve_assignment: needs rows <= columns");
    for (const auto& row : cost) require(static_cast<int>(row.size()) == m, "solve_assignment: ragged matrix");

    const T inf = std::numeric_limits<T>::max() / 4;
    std::vector<T> u(n + 1, 0), v(m + 1, 0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<T> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            T delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                T cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace schemaflow
