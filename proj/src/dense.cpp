// SPDX-License-Identifier: Apache-2.0
#include "w2k/dense.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace w2k {

namespace {
std::atomic<std::size_t> g_element_budget{std::size_t{1} << 28};
}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
    require(data.size() == rows * cols, "matrix data length must be rows * cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::size_t element_budget() { return g_element_budget.load(); }

void set_element_budget(std::size_t elements) {
    if (elements == 0) throw std::invalid_argument("element budget must be positive");
    g_element_budget.store(elements);
}

void check_element_budget(std::size_t elements, const char* what) {
    if (elements > g_element_budget.load()) {
        throw std::length_error(std::string(what) + ": dense result of " +
                                std::to_string(elements) +
                                " elements exceeds the element budget of " +
                                std::to_string(g_element_budget.load()));
    }
}

std::size_t checked_product(std::span<const std::size_t> dims, const char* what) {
    std::size_t product = 1;
    for (std::size_t d : dims) {
        if (d != 0 && product > g_element_budget.load() / d) {
            throw std::length_error(std::string(what) + ": result size overflows the element budget");
        }
        product *= d;
    }
    check_element_budget(product, what);
    return product;
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

void require_index(bool condition, const std::string& message) {
    if (!condition) throw std::out_of_range(message);
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": non-finite value");
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

}  // namespace w2k
