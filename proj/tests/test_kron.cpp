// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "reference.hpp"
#include "w2k/kron.hpp"

using namespace w2k;

namespace {

Vector random_vector(std::mt19937_64& rng, std::size_t len) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector v(len);
    for (double& x : v) x = dist(rng);
    return v;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& x : m.data) x = dist(rng);
    return m;
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("kron_vec basics") {
    const Vector a{2, 3};
    const Vector b{1, 0, 1};
    CHECK(kron_vec(a, b) == Vector{2, 0, 2, 3, 0, 3});
    CHECK(kron_vec(a, b) == ref::kron_vec(a, b));

    const Vector v{0.5, -1.25, 3};
    CHECK(kron_vec(v, Vector{1}) == v);

    CHECK(kron_vec(Vector{1, 0}, Vector{0, 1}) == Vector{0, 1, 0, 0});
}

TEST_CASE("kron_vec rejects non-finite input") {
    CHECK_THROWS_AS(kron_vec(Vector{1, std::nan("")}, Vector{1}), std::invalid_argument);
    CHECK_THROWS_AS(kron_vec(Vector{1}, Vector{INFINITY}), std::invalid_argument);
    CHECK_THROWS_AS(kron_vec(Vector{}, Vector{1}), std::invalid_argument);
}

TEST_CASE("kron_vec norm is multiplicative") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector a = random_vector(rng, 1 + trial % 6);
        const Vector b = random_vector(rng, 1 + (trial / 6) % 6);
        const Vector ab = kron_vec(a, b);
        CHECK(close_rel(l2_norm(ab), l2_norm(a) * l2_norm(b), 1e-12));
    }
}

TEST_CASE("kron_vec bilinearity") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t la = 1 + trial % 5, lb = 1 + (trial / 5) % 5;
        const Vector a = random_vector(rng, la);
        const Vector a2 = random_vector(rng, la);
        const Vector b = random_vector(rng, lb);
        const double alpha = 0.75, beta = -1.5;
        Vector mixed(la);
        for (std::size_t i = 0; i < la; ++i) mixed[i] = alpha * a[i] + beta * a2[i];
        const Vector lhs = kron_vec(mixed, b);
        const Vector k1 = kron_vec(a, b);
        const Vector k2 = kron_vec(a2, b);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            CHECK(close_rel(lhs[i], alpha * k1[i] + beta * k2[i], 1e-12));
        }
    }
}

TEST_CASE("kron_mat examples") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix b(2, 2, {0, 1, 1, 0});
    const Matrix ab = kron_mat(a, b);
    CHECK(ab.rows == 4);
    CHECK(ab.cols == 4);
    CHECK(ab.data == std::vector<double>{0, 1, 0, 2, 1, 0, 2, 0, 0, 3, 0, 4, 3, 0, 4, 0});

    const Matrix i4 = kron_mat(Matrix::identity(2), Matrix::identity(2));
    CHECK(i4.data == Matrix::identity(4).data);

    const Matrix c(1, 1, {2.5});
    const Matrix cb = kron_mat(c, b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(cb.data[i] == 2.5 * b.data[i]);
}

TEST_CASE("kron_mat matches the entry-formula reference on random inputs") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 1 + trial % 4, 1 + (trial / 4) % 4);
        const Matrix b = random_matrix(rng, 1 + (trial / 2) % 3, 1 + (trial / 3) % 3);
        const Matrix got = kron_mat(a, b);
        const Matrix want = ref::kron_mat(a, b);
        CHECK(got.data == want.data);
    }
}

TEST_CASE("kron_entry equals kron_mat entries exactly") {
    std::mt19937_64 rng(10);
    const Matrix a = random_matrix(rng, 3, 4);
    const Matrix b = random_matrix(rng, 2, 5);
    const Matrix ab = kron_mat(a, b);
    for (std::size_t i = 0; i < ab.rows; ++i) {
        for (std::size_t j = 0; j < ab.cols; ++j) {
            CHECK(kron_entry(a, b, i, j) == ab(i, j));
        }
    }
}

TEST_CASE("kron_entry examples and bounds") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix b(2, 2, {0, 1, 1, 0});
    CHECK(kron_entry(a, b, 0, 1) == 1.0);
    CHECK(kron_entry(a, b, 0, 3) == 2.0);
    const Matrix i2 = Matrix::identity(2);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(kron_entry(i2, i2, i, j) == (i == j ? 1.0 : 0.0));
        }
    }
    CHECK_THROWS_AS(kron_entry(a, b, 4, 0), std::out_of_range);
    CHECK_THROWS_AS(kron_entry(a, b, 0, 4), std::out_of_range);
}

TEST_CASE("0-based entry formula agrees with the 1-based block formula") {
    std::mt19937_64 rng(11);
    const Matrix a = random_matrix(rng, 3, 2);
    const Matrix b = random_matrix(rng, 4, 3);
    const std::size_t p = b.rows, q = b.cols;
    for (std::size_t i1 = 1; i1 <= a.rows * b.rows; ++i1) {
        for (std::size_t j1 = 1; j1 <= a.cols * b.cols; ++j1) {
            // 1-based: a_{floor((i-1)/p)+1, floor((j-1)/q)+1} *
            //          b_{i - floor((i-1)/p)p, j - floor((j-1)/q)q}
            const std::size_t ar = (i1 - 1) / p + 1;
            const std::size_t ac = (j1 - 1) / q + 1;
            const std::size_t br = i1 - ((i1 - 1) / p) * p;
            const std::size_t bc = j1 - ((j1 - 1) / q) * q;
            const double one_based = a(ar - 1, ac - 1) * b(br - 1, bc - 1);
            CHECK(kron_entry(a, b, i1 - 1, j1 - 1) == one_based);
        }
    }
}

TEST_CASE("kron_row examples") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix b(2, 2, {0, 1, 1, 0});
    const std::vector<Matrix> two{a, b};
    CHECK(kron_row(two, 1) == Vector{1, 0, 2, 0});

    std::mt19937_64 rng(12);
    const Matrix m = random_matrix(rng, 4, 3);
    const std::vector<Matrix> single{m};
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto row = m.row(i);
        CHECK(kron_row(single, i) == Vector(row.begin(), row.end()));
    }

    const std::vector<Matrix> eyes{Matrix::identity(3), Matrix::identity(3)};
    Vector e4(9, 0.0);
    e4[4] = 1.0;
    CHECK(kron_row(eyes, 4) == e4);

    CHECK_THROWS_AS(kron_row(two, 4), std::out_of_range);
}

TEST_CASE("kron_row equals rows of the iterated product exactly") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Matrix> factors;
        const std::size_t order = 1 + trial % 4;
        for (std::size_t j = 0; j < order; ++j) {
            factors.push_back(random_matrix(rng, 1 + (trial + j) % 3, 1 + (trial + 2 * j) % 3));
        }
        Matrix full = factors[0];
        for (std::size_t j = 1; j < order; ++j) full = kron_mat(full, factors[j]);
        for (std::size_t i = 0; i < full.rows; ++i) {
            const auto row = full.row(i);
            CHECK(kron_row(factors, i) == Vector(row.begin(), row.end()));
        }
    }
}

TEST_CASE("simple_tensor_to_dense") {
    CHECK(simple_tensor_to_dense({{{1, 0}, {1, 0}}}) == Vector{1, 0, 0, 0});
    CHECK(simple_tensor_to_dense({{{2}, {3}, {4}}}) == Vector{24});
    CHECK(simple_tensor_to_dense({{{1, 1}, {1, -1}}}) == Vector{1, -1, 1, -1});
}

TEST_CASE("factored_inner examples") {
    const Vector e0{1, 0};
    const Vector e1{0, 1};
    // v = e0 (x) e0, w = e1 (x) e0: orthogonal.
    CHECK(factored_inner({{e0, e0}}, {{e1, e0}}) == 0.0);
    // v = w = e0 (x) e0 + e1 (x) e1.
    const std::vector<std::vector<Vector>> bell{{e0, e0}, {e1, e1}};
    CHECK(factored_inner(bell, bell) == 2.0);
}

TEST_CASE("factored_inner equals the dense inner product") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t order = 1 + trial % 4;
        const std::size_t rank_v = 1 + (trial / 3) % 4;
        const std::size_t rank_w = 1 + (trial / 5) % 4;
        std::vector<std::size_t> dims(order);
        for (std::size_t j = 0; j < order; ++j) dims[j] = 1 + (trial + j) % 5;

        auto make_grid = [&](std::size_t rank) {
            std::vector<std::vector<Vector>> grid(rank);
            for (auto& comp : grid) {
                for (std::size_t j = 0; j < order; ++j) {
                    comp.push_back(random_vector(rng, dims[j]));
                }
            }
            return grid;
        };
        const auto v = make_grid(rank_v);
        const auto w = make_grid(rank_w);

        auto reconstruct = [&](const std::vector<std::vector<Vector>>& grid) {
            Vector sum;
            for (const auto& comp : grid) {
                const Vector dense = simple_tensor_to_dense({comp});
                if (sum.empty()) sum.assign(dense.size(), 0.0);
                for (std::size_t i = 0; i < dense.size(); ++i) sum[i] += dense[i];
            }
            return sum;
        };
        const double dense = dot(reconstruct(v), reconstruct(w));
        const double factored = factored_inner(v, w);
        CHECK(std::abs(factored - dense) <=
              1e-10 * std::max({std::abs(dense), std::abs(factored), 1.0}));
    }
}

TEST_CASE("factored_inner rejects mismatched grids") {
    const Vector e0{1, 0};
    CHECK_THROWS_AS(factored_inner({{e0, e0}}, {{e0}}), std::invalid_argument);
    CHECK_THROWS_AS(factored_inner({{e0}}, {{Vector{1, 0, 0}}}), std::invalid_argument);
}

TEST_CASE("the balanced two-qubit pair admits no rank-1 factorization") {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    // (e0 (x) e0 + e1 (x) e1) / sqrt(2) reshaped to a 2 x 2 matrix.
    const Matrix reshaped(2, 2, {inv_sqrt2, 0, 0, inv_sqrt2});
    CHECK(best_rank1_residual(reshaped) >= 0.49);

    // Sanity: a simple tensor has (numerically) zero residual.
    const Vector simple = kron_vec(Vector{0.3, -1.2}, Vector{2.0, 0.7});
    const Matrix simple_mat(2, 2, simple);
    CHECK(best_rank1_residual(simple_mat) <= 1e-12);
}

TEST_CASE("mixed radix digits round-trip") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t order = 1 + trial % 4;
        std::vector<std::size_t> radices(order);
        std::size_t range = 1;
        for (auto& r : radices) {
            r = 1 + static_cast<std::size_t>(rng() % 5);
            range *= r;
        }
        for (std::size_t index = 0; index < range; ++index) {
            const auto digits = mixed_radix_digits(index, radices);
            CHECK(mixed_radix_index(digits, radices) == index);
        }
    }
    CHECK_THROWS_AS(mixed_radix_digits(6, std::vector<std::size_t>{2, 3}),
                    std::out_of_range);
}

TEST_CASE("element budget rejects oversized products") {
    const std::size_t saved = element_budget();
    set_element_budget(1024);
    const Matrix a(40, 40);
    const Matrix b(40, 40);
    CHECK_THROWS_AS(kron_mat(a, b), std::length_error);
    CHECK_THROWS_AS(simple_tensor_to_dense({{Vector(64, 1.0), Vector(64, 1.0)}}),
                    std::length_error);
    set_element_budget(saved);
    CHECK_NOTHROW(kron_mat(Matrix::identity(8), Matrix::identity(8)));
}
