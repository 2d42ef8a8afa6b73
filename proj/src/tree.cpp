// SPDX-License-Identifier: Apache-2.0
#include "w2k/tree.hpp"

#include <algorithm>

namespace w2k {

namespace {
int build(std::vector<TreePlan::Node>& nodes, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return -1;
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    const int left = build(nodes, lo, mid);
    const int right = build(nodes, mid, hi);
    nodes.push_back({lo, hi, left, right});
    return static_cast<int>(nodes.size()) - 1;
}
}  // namespace

TreePlan::TreePlan(std::size_t order_in) : order(order_in) {
    require(order >= 1, "tree order must be >= 1");
    if (order == 1) return;
    build(nodes, 0, order);

    for (const Node& node : nodes) level_widths.push_back(node.width());
    std::sort(level_widths.begin(), level_widths.end());
    level_widths.erase(std::unique(level_widths.begin(), level_widths.end()),
                       level_widths.end());

    shared_slot.resize(nodes.size());
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const auto it = std::lower_bound(level_widths.begin(), level_widths.end(),
                                         nodes[id].width());
        shared_slot[id] = static_cast<int>(it - level_widths.begin());
    }
}

std::size_t TreePlan::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> node_depth(nodes.size(), 1);
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        std::size_t left_d = nodes[id].left >= 0 ? node_depth[nodes[id].left] : 0;
        std::size_t right_d = nodes[id].right >= 0 ? node_depth[nodes[id].right] : 0;
        node_depth[id] = 1 + std::max(left_d, right_d);
    }
    return node_depth.back();
}

std::size_t node_dim(std::size_t q, std::size_t width) {
    std::size_t dim = 1;
    for (std::size_t i = 0; i < width; ++i) dim *= q;
    return dim;
}

}  // namespace w2k
