// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "w2k/dense.hpp"
#include "w2k/gradient.hpp"
#include "w2k/layer_norm.hpp"
#include "w2k/norm_config.hpp"
#include "w2k/shape.hpp"
#include "w2k/tree.hpp"

namespace w2k {

/// Per-word factored embedding. Each word's p-dimensional vector is stored
/// as rank-r order-n leaf vectors of dimension q and reconstructed through a
/// balanced combination tree, optionally with LayerNorm at internal nodes.
/// Storage is d*r*n*q scalars for the leaves plus the (shared) norm
/// parameters.
class KetEmbedding {
public:
    KetEmbedding(FactoredShape shape, std::uint64_t seed, NormConfig norm = {});

    const FactoredShape& shape() const { return shape_; }
    const NormConfig& norm_config() const { return norm_; }
    const TreePlan& tree() const { return tree_; }

    /// Leaf vector v_{jk} of `word` (length q).
    std::span<double> leaf(std::size_t word, std::size_t k, std::size_t j);
    std::span<const double> leaf(std::size_t word, std::size_t k, std::size_t j) const;

    Vector gather_word(std::size_t word) const;

    /// One row per requested word, in order. Rows run in parallel when
    /// `threads` != 1 (0 = all available).
    Matrix gather_batch(std::span<const std::size_t> words, int threads = 0) const;

    /// Exact gradients of sum_rows <upstream_row, gather_word(words[row])>
    /// with respect to every leaf vector and norm parameter. Duplicate words
    /// accumulate. Row order is a fixed reduction: single-thread results are
    /// bitwise reproducible.
    GradientBundle backward_batch(std::span<const std::size_t> words,
                                  const Matrix& upstream, int threads = 0) const;

    GradientBundle zero_gradients() const;
    std::vector<std::span<double>> param_views();
    std::vector<std::span<const double>> param_views() const;

    std::size_t factor_param_count() const;  // d*r*n*q
    std::size_t norm_param_count() const;

    std::vector<double>& factors() { return factors_; }
    const std::vector<double>& factors() const { return factors_; }
    std::vector<LayerNormParams>& node_norms() { return node_norms_; }
    const std::vector<LayerNormParams>& node_norms() const { return node_norms_; }

    /// Index of the norm parameter set used by tree node `node_id`,
    /// or -1 when that node is not normalized under the current config.
    int norm_slot(int node_id) const;

private:
    FactoredShape shape_;
    NormConfig norm_;
    TreePlan tree_;
    std::vector<double> factors_;  // ((word * r + k) * n + j) * q + c
    std::vector<LayerNormParams> node_norms_;
};

}  // namespace w2k
