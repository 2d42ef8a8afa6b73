// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "w2k/dense.hpp"

namespace w2k {

struct LayerNormParams {
    Vector gain;
    Vector bias;
    double epsilon = 1e-5;

    LayerNormParams() = default;
    explicit LayerNormParams(std::size_t dim, double eps = 1e-5)
        : gain(dim, 1.0), bias(dim, 0.0), epsilon(eps) {}

    std::size_t dim() const { return gain.size(); }
};

/// Forward intermediates needed by layer_norm_backward.
struct LayerNormCache {
    Vector x_hat;
    double inv_std = 0.0;
};

/// y_i = gain_i * (x_i - mean) / sqrt(var + eps) + bias_i, with the
/// population variance over x. `y` may alias `x`.
void layer_norm(std::span<const double> x, const LayerNormParams& params,
                std::span<double> y, LayerNormCache* cache = nullptr);

Vector layer_norm(const Vector& x, const LayerNormParams& params);

/// Reverse-mode step: consumes d_y, writes d_x (may alias d_y) and
/// accumulates into d_gain / d_bias.
void layer_norm_backward(std::span<const double> d_y, const LayerNormParams& params,
                         const LayerNormCache& cache, std::span<double> d_x,
                         std::span<double> d_gain, std::span<double> d_bias);

}  // namespace w2k
