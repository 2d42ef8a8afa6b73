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

/// Scratch accounting for the lazy gather path.
struct GatherStats {
    std::size_t output_elements = 0;
    std::size_t scratch_elements_per_thread = 0;
    std::size_t threads_used = 1;
};

/// Whole-matrix factored embedding: the d x p matrix is a rank-r sum of
/// order-n Kronecker products of q x t factor matrices. Rows are gathered
/// lazily from single rows of the factors; the full matrix is never formed.
/// Row indices in [d, t^n) and columns in [p, q^n) are phantom: unreachable
/// through the public API.
class KetXSOperator {
public:
    KetXSOperator(FactoredShape shape, std::uint64_t seed, NormConfig norm = {});

    const FactoredShape& shape() const { return shape_; }
    const NormConfig& norm_config() const { return norm_; }
    const TreePlan& tree() const { return tree_; }

    Matrix& factor(std::size_t k, std::size_t j);
    const Matrix& factor(std::size_t k, std::size_t j) const;

    /// One row per requested word. Extra memory per worker thread is one
    /// q^n scratch buffer (default norm-off path).
    Matrix gather_rows(std::span<const std::size_t> words, int threads = 0,
                       GatherStats* stats = nullptr) const;

    /// Every row, for tests and export only; guarded by the element budget.
    Matrix full_dense() const;

    /// Exact gradients of sum_rows <upstream_row, row reconstruction> with
    /// respect to every factor entry (and norm parameters when enabled).
    /// Untouched factor rows stay zero.
    GradientBundle backward_rows(std::span<const std::size_t> words,
                                 const Matrix& upstream, int threads = 0) const;

    GradientBundle zero_gradients() const;
    std::vector<std::span<double>> param_views();
    std::vector<std::span<const double>> param_views() const;

    std::size_t factor_param_count() const;  // r*n*q*t
    std::size_t norm_param_count() const;

    std::vector<LayerNormParams>& node_norms() { return node_norms_; }
    const std::vector<LayerNormParams>& node_norms() const { return node_norms_; }
    int norm_slot(int node_id) const;

    /// Digits of a row index, base t, most significant first; digit j picks
    /// the row of factor j.
    std::vector<std::size_t> row_digits(std::size_t word) const;

private:
    FactoredShape shape_;
    NormConfig norm_;
    TreePlan tree_;
    std::vector<Matrix> factors_;  // index k * n + j, each q x t
    std::vector<LayerNormParams> node_norms_;
};

}  // namespace w2k
