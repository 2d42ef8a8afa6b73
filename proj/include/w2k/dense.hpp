// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace w2k {

using Vector = std::vector<double>;

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d);

    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }

    static Matrix identity(std::size_t n);
};

/// Upper bound on the number of elements any single operation may
/// materialize as a dense result. Oversized products fail instead of
/// allocating.
std::size_t element_budget();
void set_element_budget(std::size_t elements);

/// Throws std::length_error when a dense result of `elements` entries
/// would exceed the budget.
void check_element_budget(std::size_t elements, const char* what);

/// Product of `dims` with overflow and budget checking.
std::size_t checked_product(std::span<const std::size_t> dims, const char* what);

void require(bool condition, const std::string& message);  // std::invalid_argument
void require_index(bool condition, const std::string& message);  // std::out_of_range
void require_finite(std::span<const double> values, const char* what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

}  // namespace w2k
