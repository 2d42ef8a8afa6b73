// SPDX-License-Identifier: Apache-2.0
#include "w2k/shape.hpp"

#include <cmath>
#include <limits>

#include "w2k/dense.hpp"
#include "w2k/tree.hpp"

namespace w2k {

namespace {
// x^n with saturation at the cap (avoids overflow during the search).
std::size_t pow_capped(std::size_t x, std::size_t n, std::size_t cap) {
    std::size_t result = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (x != 0 && result > cap / x) return cap;
        result *= x;
    }
    return result;
}
}  // namespace

std::size_t ceil_root(std::size_t value, std::size_t n) {
    require(n >= 1, "ceil_root: order must be >= 1");
    if (value <= 1) return 1;
    if (n == 1) return value;
    std::size_t lo = 1, hi = value;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (pow_capped(mid, n, value) >= value) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

std::size_t FactoredShape::padded_dim() const {
    return pow_capped(leaf_dim, order, std::numeric_limits<std::size_t>::max());
}

std::size_t FactoredShape::padded_rows() const {
    return pow_capped(leaf_rows, order, std::numeric_limits<std::size_t>::max());
}

void FactoredShape::validate(ModelKind kind) const {
    require(vocab_size >= 1, "shape: vocab size must be >= 1");
    require(embed_dim >= 1, "shape: embedding dim must be >= 1");
    require(order >= 1, "shape: order must be >= 1");
    require(rank >= 1, "shape: rank must be >= 1");
    require(leaf_dim >= 2, "shape: leaf dim must be >= 2");
    require(padded_dim() >= embed_dim, "shape: leaf_dim^order must cover the embedding dim");
    if (kind == ModelKind::ketxs) {
        require(leaf_rows >= 1, "shape: leaf rows must be >= 1");
        require(padded_rows() >= vocab_size, "shape: leaf_rows^order must cover the vocabulary");
    }
}

FactoredShape solve_shape(std::size_t d, std::size_t p, std::size_t n,
                          std::size_t r, ModelKind kind) {
    require(d >= 1 && p >= 1 && n >= 1 && r >= 1, "solve_shape: all dims must be >= 1");
    FactoredShape shape;
    shape.vocab_size = d;
    shape.embed_dim = p;
    shape.order = n;
    shape.rank = r;
    shape.leaf_dim = std::max<std::size_t>(2, ceil_root(p, n));
    shape.leaf_rows = kind == ModelKind::ketxs ? ceil_root(d, n) : 0;
    shape.validate(kind);
    return shape;
}

ParamCountReport param_count_report(const FactoredShape& shape, ModelKind kind,
                                    bool with_layer_norm, std::size_t baseline_dim) {
    shape.validate(kind);
    ParamCountReport report;
    report.count = kind == ModelKind::ket
                       ? shape.vocab_size * shape.rank * shape.order * shape.leaf_dim
                       : shape.rank * shape.order * shape.leaf_dim * shape.leaf_rows;
    if (with_layer_norm) {
        const TreePlan plan(shape.order);
        for (std::size_t width : plan.level_widths) {
            report.layer_norm_count += 2 * node_dim(shape.leaf_dim, width);
        }
        report.count += report.layer_norm_count;
    }
    const std::size_t base_dim = baseline_dim == 0 ? shape.embed_dim : baseline_dim;
    const double dense_params = double(shape.vocab_size) * double(base_dim);
    report.space_saving_rate = dense_params / double(report.count);
    report.reported_rate = std::llround(report.space_saving_rate);
    return report;
}

std::vector<std::string> shape_warnings(const FactoredShape& shape) {
    std::vector<std::string> warnings;
    if (shape.leaf_dim < 4) {
        warnings.push_back(
            "leaf dim " + std::to_string(shape.leaf_dim) +
            " is below 4; order-1 products of such small pieces save little or "
            "no space over a dense vector of the same length");
    }
    return warnings;
}

}  // namespace w2k
