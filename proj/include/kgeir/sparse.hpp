#pragma once

#include <utility>
#include <vector>

namespace kgeir {

// Row-wise sparse matrix with fixed support; rows hold (col, weight) pairs
// sorted by column. Used for the relation matrices R^E / R^S whose rows are
// uniform over their support.
struct SparseRows {
    int rows = 0;
    int cols = 0;
    std::vector<std::vector<std::pair<int, double>>> entries;

    SparseRows() = default;
    SparseRows(int r, int c) : rows(r), cols(c), entries(r) {}

    double at(int i, int j) const {
        for (const auto& [col, w] : entries[i])
            if (col == j) return w;
        return 0.0;
    }

    int support_size(int i) const { return static_cast<int>(entries[i].size()); }
};

}  // namespace kgeir
