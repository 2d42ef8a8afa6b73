// SPDX-License-Identifier: Apache-2.0
// Internal: balanced-tree forward/backward shared by KetEmbedding and the
// normalized KetXSOperator gather path.
#pragma once

#include <span>
#include <vector>

#include "w2k/layer_norm.hpp"
#include "w2k/tree.hpp"

namespace w2k::detail {

inline void kron_into(std::span<const double> a, std::span<const double> b,
                      std::span<double> out) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i];
        double* dst = out.data() + i * b.size();
        for (std::size_t j = 0; j < b.size(); ++j) dst[j] = ai * b[j];
    }
}

struct TreeScratch {
    std::vector<Vector> value;        // per node: post-norm output
    std::vector<LayerNormCache> ln;   // per node: cache of the applied norm
    std::vector<Vector> d_value;      // per node: upstream gradient
    Vector acc;                       // rank-summed root accumulator
    Vector d_acc;                     // padded upstream gradient

    void prepare(const TreePlan& plan, std::size_t q, bool for_backward) {
        value.resize(plan.nodes.size());
        ln.resize(plan.nodes.size());
        if (for_backward) d_value.resize(plan.nodes.size());
        for (std::size_t id = 0; id < plan.nodes.size(); ++id) {
            const std::size_t dim = node_dim(q, plan.nodes[id].width());
            value[id].resize(dim);
            if (for_backward) d_value[id].resize(dim);
        }
    }
};

/// One rank component through the tree. leaves[j] has length q. norm_at(id)
/// returns the LayerNorm parameters applied at node id, or nullptr.
/// Returns the root output (leaves[0] itself when the order is 1).
template <typename NormAt>
std::span<const double> tree_component_forward(
    const TreePlan& plan, std::span<const std::span<const double>> leaves,
    NormAt&& norm_at, TreeScratch& scratch, bool keep_cache) {
    if (plan.nodes.empty()) return leaves[0];
    for (std::size_t id = 0; id < plan.nodes.size(); ++id) {
        const TreePlan::Node& node = plan.nodes[id];
        const std::span<const double> lv =
            node.left >= 0 ? std::span<const double>(scratch.value[node.left])
                           : leaves[node.lo];
        const std::span<const double> rv =
            node.right >= 0 ? std::span<const double>(scratch.value[node.right])
                            : leaves[node.mid()];
        Vector& dst = scratch.value[id];
        kron_into(lv, rv, dst);
        if (const LayerNormParams* p = norm_at(static_cast<int>(id))) {
            layer_norm(dst, *p, dst, keep_cache ? &scratch.ln[id] : nullptr);
        }
    }
    return scratch.value[static_cast<std::size_t>(plan.root())];
}

/// Reverse pass over a component evaluated with keep_cache = true (scratch
/// values must be intact). d_root is consumed. d_leaves[j] (length q) are
/// assigned, not accumulated. norm_grads(id) returns {d_gain, d_bias} spans.
template <typename NormAt, typename NormGrads>
void tree_component_backward(const TreePlan& plan,
                             std::span<const std::span<const double>> leaves,
                             NormAt&& norm_at, NormGrads&& norm_grads,
                             Vector d_root, TreeScratch& scratch,
                             std::span<Vector> d_leaves) {
    if (plan.nodes.empty()) {
        d_leaves[0].assign(d_root.begin(), d_root.end());
        return;
    }
    scratch.d_value[static_cast<std::size_t>(plan.root())] = std::move(d_root);
    for (std::size_t id = plan.nodes.size(); id-- > 0;) {
        const TreePlan::Node& node = plan.nodes[id];
        Vector& d = scratch.d_value[id];
        if (const LayerNormParams* p = norm_at(static_cast<int>(id))) {
            auto [d_gain, d_bias] = norm_grads(static_cast<int>(id));
            layer_norm_backward(d, *p, scratch.ln[id], d, d_gain, d_bias);
        }
        const std::span<const double> lv =
            node.left >= 0 ? std::span<const double>(scratch.value[node.left])
                           : leaves[node.lo];
        const std::span<const double> rv =
            node.right >= 0 ? std::span<const double>(scratch.value[node.right])
                            : leaves[node.mid()];
        const std::size_t l_len = lv.size();
        const std::size_t r_len = rv.size();
        std::span<double> d_left = node.left >= 0
                                       ? std::span<double>(scratch.d_value[node.left])
                                       : std::span<double>(d_leaves[node.lo]);
        std::span<double> d_right = node.right >= 0
                                        ? std::span<double>(scratch.d_value[node.right])
                                        : std::span<double>(d_leaves[node.mid()]);
        for (std::size_t i = 0; i < l_len; ++i) {
            double sum = 0.0;
            const double* drow = d.data() + i * r_len;
            for (std::size_t j = 0; j < r_len; ++j) sum += drow[j] * rv[j];
            d_left[i] = sum;
        }
        for (std::size_t j = 0; j < r_len; ++j) d_right[j] = 0.0;
        for (std::size_t i = 0; i < l_len; ++i) {
            const double li = lv[i];
            const double* drow = d.data() + i * r_len;
            for (std::size_t j = 0; j < r_len; ++j) d_right[j] += li * drow[j];
        }
    }
}

}  // namespace w2k::detail
