// SPDX-License-Identifier: Apache-2.0
#include "w2k/layer_norm.hpp"

#include <cmath>

namespace w2k {

void layer_norm(std::span<const double> x, const LayerNormParams& params,
                std::span<double> y, LayerNormCache* cache) {
    const std::size_t n = x.size();
    require(n == params.dim(), "layer_norm: input length must match gain/bias length");
    require(n == y.size(), "layer_norm: output length mismatch");

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : x) {
        const double d = v - mean;
        var += d * d;
    }
    var /= double(n);
    const double inv_std = 1.0 / std::sqrt(var + params.epsilon);

    if (cache) {
        cache->x_hat.resize(n);
        cache->inv_std = inv_std;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x_hat = (x[i] - mean) * inv_std;
        if (cache) cache->x_hat[i] = x_hat;
        y[i] = params.gain[i] * x_hat + params.bias[i];
    }
}

Vector layer_norm(const Vector& x, const LayerNormParams& params) {
    Vector y(x.size());
    layer_norm(x, params, y);
    return y;
}

void layer_norm_backward(std::span<const double> d_y, const LayerNormParams& params,
                         const LayerNormCache& cache, std::span<double> d_x,
                         std::span<double> d_gain, std::span<double> d_bias) {
    const std::size_t n = d_y.size();
    require(n == params.dim() && n == cache.x_hat.size(), "layer_norm_backward: length mismatch");
    require(n == d_x.size() && n == d_gain.size() && n == d_bias.size(),
            "layer_norm_backward: gradient length mismatch");

    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dxh = d_y[i] * params.gain[i];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * cache.x_hat[i];
    }
    mean_dxhat /= double(n);
    mean_dxhat_xhat /= double(n);

    for (std::size_t i = 0; i < n; ++i) {
        d_gain[i] += d_y[i] * cache.x_hat[i];
        d_bias[i] += d_y[i];
        const double dxh = d_y[i] * params.gain[i];
        d_x[i] = cache.inv_std * (dxh - mean_dxhat - cache.x_hat[i] * mean_dxhat_xhat);
    }
}

}  // namespace w2k
