// SPDX-License-Identifier: Apache-2.0
#include "w2k/kron.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace w2k {

Vector kron_vec(std::span<const double> a, std::span<const double> b) {
    require(!a.empty() && !b.empty(), "kron_vec: inputs must be non-empty");
    require_finite(a, "kron_vec");
    require_finite(b, "kron_vec");
    const std::size_t dims[] = {a.size(), b.size()};
    Vector out(checked_product(dims, "kron_vec"));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i];
        double* dst = out.data() + i * b.size();
        for (std::size_t j = 0; j < b.size(); ++j) dst[j] = ai * b[j];
    }
    return out;
}

Matrix kron_mat(const Matrix& a, const Matrix& b) {
    require(a.rows > 0 && b.rows > 0, "kron_mat: inputs must be non-empty");
    require_finite(a.data, "kron_mat");
    require_finite(b.data, "kron_mat");
    const std::size_t dims[] = {a.rows, b.rows, a.cols, b.cols};
    checked_product(dims, "kron_mat");
    Matrix out(a.rows * b.rows, a.cols * b.cols);
    for (std::size_t ia = 0; ia < a.rows; ++ia) {
        for (std::size_t ja = 0; ja < a.cols; ++ja) {
            const double av = a(ia, ja);
            for (std::size_t ib = 0; ib < b.rows; ++ib) {
                double* dst = out.data.data() + (ia * b.rows + ib) * out.cols + ja * b.cols;
                const double* src = b.data.data() + ib * b.cols;
                for (std::size_t jb = 0; jb < b.cols; ++jb) dst[jb] = av * src[jb];
            }
        }
    }
    return out;
}

double kron_entry(const Matrix& a, const Matrix& b, std::size_t i, std::size_t j) {
    require_index(i < a.rows * b.rows, "kron_entry: row index out of range");
    require_index(j < a.cols * b.cols, "kron_entry: column index out of range");
    return a(i / b.rows, j / b.cols) * b(i % b.rows, j % b.cols);
}

std::vector<std::size_t> mixed_radix_digits(std::size_t index,
                                            std::span<const std::size_t> radices) {
    std::size_t range = 1;
    for (std::size_t r : radices) {
        require(r >= 1, "mixed_radix_digits: radices must be >= 1");
        range *= r;
    }
    require_index(index < range, "mixed_radix_digits: index out of range");
    std::vector<std::size_t> digits(radices.size(), 0);
    for (std::size_t m = radices.size(); m-- > 0;) {
        digits[m] = index % radices[m];
        index /= radices[m];
    }
    return digits;
}

std::size_t mixed_radix_index(std::span<const std::size_t> digits,
                              std::span<const std::size_t> radices) {
    require(digits.size() == radices.size(), "mixed_radix_index: digit count mismatch");
    std::size_t index = 0;
    for (std::size_t m = 0; m < digits.size(); ++m) {
        require_index(digits[m] < radices[m], "mixed_radix_index: digit out of range");
        index = index * radices[m] + digits[m];
    }
    return index;
}

Vector kron_row(std::span<const Matrix> factors, std::size_t i) {
    require(!factors.empty(), "kron_row: need at least one factor");
    std::vector<std::size_t> row_radices(factors.size());
    std::vector<std::size_t> col_dims(factors.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        row_radices[j] = factors[j].rows;
        col_dims[j] = factors[j].cols;
    }
    const std::size_t out_len = checked_product(col_dims, "kron_row");
    const auto digits = mixed_radix_digits(i, row_radices);

    Vector out(out_len);
    auto first = factors[0].row(digits[0]);
    std::copy(first.begin(), first.end(), out.begin());
    std::size_t len = factors[0].cols;
    for (std::size_t j = 1; j < factors.size(); ++j) {
        auto next = factors[j].row(digits[j]);
        // In-place expansion from the tail: out[i*R + c] = out[i] * next[c].
        const std::size_t r = next.size();
        for (std::size_t idx = len; idx-- > 0;) {
            const double v = out[idx];
            double* dst = out.data() + idx * r;
            for (std::size_t c = r; c-- > 0;) dst[c] = v * next[c];
        }
        len *= r;
    }
    return out;
}

Vector simple_tensor_to_dense(const SimpleTensorFactors& t) {
    require(!t.factors.empty(), "simple_tensor_to_dense: need at least one factor");
    std::vector<std::size_t> dims;
    dims.reserve(t.factors.size());
    for (const auto& f : t.factors) {
        require(!f.empty(), "simple_tensor_to_dense: factors must be non-empty");
        dims.push_back(f.size());
    }
    checked_product(dims, "simple_tensor_to_dense");
    Vector out = t.factors[0];
    for (std::size_t j = 1; j < t.factors.size(); ++j) out = kron_vec(out, t.factors[j]);
    return out;
}

double factored_inner(const std::vector<std::vector<Vector>>& v_factors,
                      const std::vector<std::vector<Vector>>& w_factors) {
    require(!v_factors.empty() && !w_factors.empty(), "factored_inner: empty grid");
    const std::size_t order = v_factors[0].size();
    require(order >= 1, "factored_inner: order must be >= 1");
    for (const auto& comp : v_factors)
        require(comp.size() == order, "factored_inner: ragged grid");
    for (const auto& comp : w_factors)
        require(comp.size() == order, "factored_inner: order mismatch between grids");
    for (std::size_t j = 0; j < order; ++j) {
        const std::size_t dim = v_factors[0][j].size();
        for (const auto& comp : v_factors)
            require(comp[j].size() == dim, "factored_inner: dim mismatch within grid");
        for (const auto& comp : w_factors)
            require(comp[j].size() == dim, "factored_inner: dim mismatch between grids");
    }

    double total = 0.0;
    for (const auto& v_comp : v_factors) {
        for (const auto& w_comp : w_factors) {
            double prod = 1.0;
            for (std::size_t j = 0; j < order; ++j) prod *= dot(v_comp[j], w_comp[j]);
            total += prod;
        }
    }
    return total;
}

SingularPair top_singular_pair(const Matrix& m, int max_iterations, double tolerance) {
    require(m.rows > 0 && m.cols > 0, "top_singular_pair: empty matrix");
    SingularPair pair;
    pair.right.assign(m.cols, 1.0 / std::sqrt(double(m.cols)));

    Vector mv(m.rows), next(m.cols);
    for (int iter = 0; iter < max_iterations; ++iter) {
        // mv = m * v, next = m^T * mv
        for (std::size_t i = 0; i < m.rows; ++i) mv[i] = dot(m.row(i), pair.right);
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < m.rows; ++i) {
            const double s = mv[i];
            const double* row = m.data.data() + i * m.cols;
            for (std::size_t j = 0; j < m.cols; ++j) next[j] += s * row[j];
        }
        const double norm = l2_norm(next);
        if (norm == 0.0) break;  // m * v is null; any unit v is optimal
        double delta = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double nj = next[j] / norm;
            delta = std::max(delta, std::abs(nj - pair.right[j]));
            pair.right[j] = nj;
        }
        if (delta < tolerance) break;
    }

    for (std::size_t i = 0; i < m.rows; ++i) mv[i] = dot(m.row(i), pair.right);
    pair.sigma = l2_norm(mv);
    pair.left.assign(m.rows, 0.0);
    if (pair.sigma > 0.0) {
        for (std::size_t i = 0; i < m.rows; ++i) pair.left[i] = mv[i] / pair.sigma;
    }
    return pair;
}

double best_rank1_residual(const Matrix& m) {
    const SingularPair top = top_singular_pair(m);
    double frob_sq = 0.0;
    for (double v : m.data) frob_sq += v * v;
    return frob_sq - top.sigma * top.sigma;
}

}  // namespace w2k
