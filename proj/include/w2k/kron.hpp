// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "w2k/dense.hpp"

namespace w2k {

/// Ordered factor vectors of one simple (rank-1) tensor component.
/// The represented vector is the Kronecker product of the factors in order.
struct SimpleTensorFactors {
    std::vector<Vector> factors;
};

/// c[i*len(b)+j] = a[i]*b[j]. Rejects non-finite input.
Vector kron_vec(std::span<const double> a, std::span<const double> b);

/// Block matrix [a_ij * B].
Matrix kron_mat(const Matrix& a, const Matrix& b);

/// Entry (i, j) of kron_mat(a, b) without materializing it. All indexing
/// is 0-based: a(i / rows(b), j / cols(b)) * b(i % rows(b), j % cols(b)).
double kron_entry(const Matrix& a, const Matrix& b, std::size_t i, std::size_t j);

/// Row `i` of the iterated Kronecker product of `factors`. Touches one row
/// per factor; never materializes the product matrix.
Vector kron_row(std::span<const Matrix> factors, std::size_t i);

/// Iterated kron_vec over the factors in order.
Vector simple_tensor_to_dense(const SimpleTensorFactors& t);

/// Inner product of two rank-decomposed vectors v = sum_k (x) v[k][j] and
/// w = sum_k' (x) w[k'][j] computed entirely in factored form:
/// sum_{k,k'} prod_j <v[k][j], w[k'][j]>.
double factored_inner(const std::vector<std::vector<Vector>>& v_factors,
                      const std::vector<std::vector<Vector>>& w_factors);

/// Mixed-radix digit decomposition; digits[0] is the most significant.
/// radices[j] is the base of digit j. index must be < prod(radices).
std::vector<std::size_t> mixed_radix_digits(std::size_t index,
                                            std::span<const std::size_t> radices);

/// Inverse of mixed_radix_digits.
std::size_t mixed_radix_index(std::span<const std::size_t> digits,
                              std::span<const std::size_t> radices);

struct SingularPair {
    double sigma = 0.0;
    Vector left;
    Vector right;
};

/// Dominant singular triple of `m` by power iteration on m^T m.
SingularPair top_singular_pair(const Matrix& m, int max_iterations = 100,
                               double tolerance = 1e-10);

/// Squared Frobenius-norm residual of the best rank-1 approximation of `m`.
double best_rank1_residual(const Matrix& m);

}  // namespace w2k
