// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace w2k {

enum class ModelKind : std::uint16_t { ket = 1, ketxs = 2 };

/// Geometry of a factored embedding: a d x p matrix represented with rank-r
/// order-n products of q-dimensional pieces (q x t matrices for ketxs).
struct FactoredShape {
    std::size_t vocab_size = 0;  // d
    std::size_t embed_dim = 0;   // p
    std::size_t order = 1;       // n
    std::size_t rank = 1;        // r
    std::size_t leaf_dim = 0;    // q
    std::size_t leaf_rows = 0;   // t; used by ketxs only, 0 for ket

    std::size_t padded_dim() const;   // q^n, >= p
    std::size_t padded_rows() const;  // t^n, >= d (ketxs)

    void validate(ModelKind kind) const;
};

/// Smallest x >= 1 with x^n >= value. Exact integer search; no float roots.
std::size_t ceil_root(std::size_t value, std::size_t n);

/// Solves q (and t for ketxs) from (d, p, n, r) by ceiling roots.
/// q is clamped to >= 2.
FactoredShape solve_shape(std::size_t d, std::size_t p, std::size_t n,
                          std::size_t r, ModelKind kind);

struct ParamCountReport {
    std::size_t count = 0;             // trainable factor parameters
    std::size_t layer_norm_count = 0;  // included in count when requested
    double space_saving_rate = 0.0;    // baseline dense params / count
    long long reported_rate = 0;       // rate rounded to an integer
};

/// count = d*r*n*q (ket) or r*n*q*t (ketxs). The saving rate divides the
/// dense baseline d*baseline_dim by the count; baseline_dim = 0 means the
/// shape's own embed_dim.
ParamCountReport param_count_report(const FactoredShape& shape, ModelKind kind,
                                    bool with_layer_norm = false,
                                    std::size_t baseline_dim = 0);

/// Advisory notes (e.g. leaf dims too small to compress anything).
std::vector<std::string> shape_warnings(const FactoredShape& shape);

}  // namespace w2k
