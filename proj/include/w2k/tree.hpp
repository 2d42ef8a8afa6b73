// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "w2k/dense.hpp"

namespace w2k {

/// Balanced, left-heavy combination tree over `order` leaves: the left child
/// of a span of m leaves covers ceil(m/2) of them. Nodes are listed
/// children-first, so iterating `nodes` front to back is a valid evaluation
/// order and the root is the last node. A single leaf has no nodes.
struct TreePlan {
    struct Node {
        std::size_t lo = 0;  // leaf span [lo, hi)
        std::size_t hi = 0;
        int left = -1;   // child node id; -1 when the child is the leaf at lo
        int right = -1;  // child node id; -1 when the child is the leaf at mid

        std::size_t width() const { return hi - lo; }
        std::size_t mid() const { return lo + (width() + 1) / 2; }
    };

    std::size_t order = 1;
    std::vector<Node> nodes;
    std::vector<std::size_t> level_widths;  // distinct node widths, ascending
    std::vector<int> shared_slot;           // node id -> index into level_widths

    explicit TreePlan(std::size_t order);

    int root() const { return nodes.empty() ? -1 : static_cast<int>(nodes.size()) - 1; }
    std::size_t depth() const;  // longest root-to-leaf edge count
};

/// Output length of a node combining m leaves of dimension q each.
std::size_t node_dim(std::size_t q, std::size_t width);

}  // namespace w2k
