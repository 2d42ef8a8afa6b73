// SPDX-License-Identifier: Apache-2.0
#include "w2k/gradient.hpp"

#include <cmath>

namespace w2k {

std::vector<std::span<double>> GradientBundle::views() {
    std::vector<std::span<double>> out;
    out.reserve(arrays.size());
    for (auto& a : arrays) out.emplace_back(a);
    return out;
}

std::vector<std::span<const double>> GradientBundle::views() const {
    std::vector<std::span<const double>> out;
    out.reserve(arrays.size());
    for (const auto& a : arrays) out.emplace_back(a);
    return out;
}

void GradientBundle::set_zero() {
    for (auto& a : arrays) std::fill(a.begin(), a.end(), 0.0);
}

void GradientBundle::accumulate(const GradientBundle& other) {
    require(arrays.size() == other.arrays.size(), "gradient bundle: array count mismatch");
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        require(arrays[i].size() == other.arrays[i].size(),
                "gradient bundle: array shape mismatch");
        for (std::size_t j = 0; j < arrays[i].size(); ++j) {
            arrays[i][j] += other.arrays[i][j];
        }
    }
}

double GradientBundle::max_abs() const {
    double result = 0.0;
    for (const auto& a : arrays) {
        for (double v : a) result = std::max(result, std::abs(v));
    }
    return result;
}

std::size_t GradientBundle::total_size() const {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.size();
    return n;
}

}  // namespace w2k
