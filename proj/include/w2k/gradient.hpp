// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "w2k/dense.hpp"

namespace w2k {

/// Gradient arrays congruent one-to-one with a model's trainable arrays,
/// in the same order as the model's param_views().
struct GradientBundle {
    std::vector<Vector> arrays;

    std::vector<std::span<double>> views();
    std::vector<std::span<const double>> views() const;

    void set_zero();
    void accumulate(const GradientBundle& other);  // elementwise +=
    double max_abs() const;
    std::size_t total_size() const;
};

}  // namespace w2k
