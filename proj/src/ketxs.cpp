// SPDX-License-Identifier: Apache-2.0
#include "w2k/ketxs.hpp"

#include <cmath>
#include <random>

#include "par_util.hpp"
#include "tree_eval.hpp"

namespace w2k {

namespace {

// Decomposes a row index into base-t digits, most significant first.
void row_digits_into(std::size_t word, std::size_t t, std::span<std::size_t> digits) {
    for (std::size_t m = digits.size(); m-- > 0;) {
        digits[m] = word % t;
        word /= t;
    }
}

struct RowScratch {
    Vector buf;                        // q^n component buffer (norm-off path)
    std::vector<std::size_t> digits;   // n base-t digits
    std::vector<Vector> prefixes;      // prefix Kronecker chains (backward)
    detail::TreeScratch tree;          // normalized path
    std::vector<std::span<const double>> leaves;
    std::vector<Vector> d_leaves;
};

const LayerNormParams* xs_norm_at(const KetXSOperator& op, int node_id) {
    const int slot = op.norm_slot(node_id);
    return slot >= 0 ? &op.node_norms()[slot] : nullptr;
}

// Lazy reconstruction of one row: digit j selects one row of factor (k, j),
// expanded in place so the only scratch is one q^n buffer.
void gather_row_plain(const KetXSOperator& op, std::size_t word,
                      std::span<double> out, RowScratch& s) {
    const FactoredShape& shape = op.shape();
    const std::size_t q = shape.leaf_dim;
    const std::size_t n = shape.order;
    row_digits_into(word, shape.leaf_rows, s.digits);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < shape.rank; ++k) {
        auto first = op.factor(k, 0).row(s.digits[0]);
        std::copy(first.begin(), first.end(), s.buf.begin());
        std::size_t len = q;
        for (std::size_t j = 1; j < n; ++j) {
            auto next = op.factor(k, j).row(s.digits[j]);
            // Tail-first in-place expansion: buf[i*q + c] = buf[i] * next[c].
            for (std::size_t i = len; i-- > 0;) {
                const double v = s.buf[i];
                double* dst = s.buf.data() + i * q;
                for (std::size_t c = q; c-- > 0;) dst[c] = v * next[c];
            }
            len *= q;
        }
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += s.buf[c];
    }
}

void gather_row_normed(const KetXSOperator& op, std::size_t word,
                       std::span<double> out, RowScratch& s) {
    const FactoredShape& shape = op.shape();
    const std::size_t qn = shape.padded_dim();
    row_digits_into(word, shape.leaf_rows, s.digits);
    s.leaves.resize(shape.order);
    s.tree.acc.assign(qn, 0.0);
    auto norm_at = [&](int id) { return xs_norm_at(op, id); };
    for (std::size_t k = 0; k < shape.rank; ++k) {
        for (std::size_t j = 0; j < shape.order; ++j) {
            s.leaves[j] = op.factor(k, j).row(s.digits[j]);
        }
        auto comp = detail::tree_component_forward(op.tree(), s.leaves, norm_at,
                                                   s.tree, false);
        for (std::size_t c = 0; c < qn; ++c) s.tree.acc[c] += comp[c];
    }
    if (op.norm_config().mode == NormMode::after_sum && shape.order > 1) {
        layer_norm(s.tree.acc, op.node_norms()[0], s.tree.acc);
    }
    std::copy(s.tree.acc.begin(), s.tree.acc.begin() + static_cast<long>(out.size()),
              out.begin());
}

// Reverse pass of the plain lazy gather for one row: walk the prefix chain
// P_m = P_{m-1} (x) a_m backwards, shrinking the upstream cube in place.
void backward_row_plain(const KetXSOperator& op, std::size_t word,
                        std::span<const double> upstream_row, GradientBundle& bundle,
                        RowScratch& s) {
    const FactoredShape& shape = op.shape();
    const std::size_t q = shape.leaf_dim;
    const std::size_t n = shape.order;
    const std::size_t qn = shape.padded_dim();
    row_digits_into(word, shape.leaf_rows, s.digits);

    Vector& d_cube = s.tree.d_acc;
    for (std::size_t k = 0; k < shape.rank; ++k) {
        if (n == 1) {
            double* grad = bundle.arrays[k].data() + s.digits[0] * q;
            for (std::size_t c = 0; c < upstream_row.size(); ++c) grad[c] += upstream_row[c];
            continue;
        }
        std::span<const double> prev = op.factor(k, 0).row(s.digits[0]);
        for (std::size_t m = 1; m + 1 < n; ++m) {
            detail::kron_into(prev, op.factor(k, m).row(s.digits[m]), s.prefixes[m]);
            prev = s.prefixes[m];
        }

        d_cube.assign(qn, 0.0);
        std::copy(upstream_row.begin(), upstream_row.end(), d_cube.begin());
        std::size_t l_len = qn / q;
        for (std::size_t m = n; m-- > 1;) {
            const std::span<const double> p_prev =
                m >= 2 ? std::span<const double>(s.prefixes[m - 1])
                       : op.factor(k, 0).row(s.digits[0]);
            const std::span<const double> a_m = op.factor(k, m).row(s.digits[m]);
            double* grad = bundle.arrays[k * n + m].data() + s.digits[m] * q;
            for (std::size_t c = 0; c < q; ++c) {
                double sum = 0.0;
                for (std::size_t i = 0; i < l_len; ++i) sum += d_cube[i * q + c] * p_prev[i];
                grad[c] += sum;
            }
            for (std::size_t i = 0; i < l_len; ++i) {
                double sum = 0.0;
                const double* drow = d_cube.data() + i * q;
                for (std::size_t c = 0; c < q; ++c) sum += drow[c] * a_m[c];
                d_cube[i] = sum;
            }
            l_len /= q;
        }
        double* grad0 = bundle.arrays[k * n].data() + s.digits[0] * q;
        for (std::size_t c = 0; c < q; ++c) grad0[c] += d_cube[c];
    }
}

void backward_row_normed(const KetXSOperator& op, std::size_t word,
                         std::span<const double> upstream_row, GradientBundle& bundle,
                         RowScratch& s) {
    const FactoredShape& shape = op.shape();
    const std::size_t q = shape.leaf_dim;
    const std::size_t n = shape.order;
    const std::size_t r = shape.rank;
    const std::size_t qn = shape.padded_dim();
    row_digits_into(word, shape.leaf_rows, s.digits);

    s.leaves.resize(n);
    s.d_leaves.resize(n);
    for (auto& v : s.d_leaves) v.resize(q);
    s.tree.d_acc.assign(qn, 0.0);
    std::copy(upstream_row.begin(), upstream_row.end(), s.tree.d_acc.begin());

    const std::size_t norm_grad_base = r * n;
    auto norm_at = [&](int id) { return xs_norm_at(op, id); };
    auto norm_grads = [&](int id) {
        const std::size_t slot = static_cast<std::size_t>(op.norm_slot(id));
        return std::pair<std::span<double>, std::span<double>>(
            bundle.arrays[norm_grad_base + 2 * slot],
            bundle.arrays[norm_grad_base + 2 * slot + 1]);
    };

    if (op.norm_config().mode == NormMode::after_sum && n > 1) {
        s.tree.acc.assign(qn, 0.0);
        for (std::size_t k = 0; k < r; ++k) {
            for (std::size_t j = 0; j < n; ++j) s.leaves[j] = op.factor(k, j).row(s.digits[j]);
            auto comp = detail::tree_component_forward(op.tree(), s.leaves, norm_at,
                                                       s.tree, false);
            for (std::size_t c = 0; c < qn; ++c) s.tree.acc[c] += comp[c];
        }
        LayerNormCache cache;
        Vector normed(qn);
        layer_norm(s.tree.acc, op.node_norms()[0], normed, &cache);
        layer_norm_backward(s.tree.d_acc, op.node_norms()[0], cache, s.tree.d_acc,
                            bundle.arrays[norm_grad_base], bundle.arrays[norm_grad_base + 1]);
    }

    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t j = 0; j < n; ++j) s.leaves[j] = op.factor(k, j).row(s.digits[j]);
        detail::tree_component_forward(op.tree(), s.leaves, norm_at, s.tree, true);
        detail::tree_component_backward(op.tree(), s.leaves, norm_at, norm_grads,
                                        s.tree.d_acc, s.tree, s.d_leaves);
        for (std::size_t j = 0; j < n; ++j) {
            double* grad = bundle.arrays[k * n + j].data() + s.digits[j] * q;
            for (std::size_t c = 0; c < q; ++c) grad[c] += s.d_leaves[j][c];
        }
    }
}

}  // namespace

KetXSOperator::KetXSOperator(FactoredShape shape, std::uint64_t seed, NormConfig norm)
    : shape_(shape), norm_(norm), tree_(shape.order) {
    shape_.validate(ModelKind::ketxs);

    const std::size_t n = shape_.order;
    const std::size_t q = shape_.leaf_dim;
    const std::size_t t = shape_.leaf_rows;

    // Entries of a rank-r sum of n-fold products land near std 0.1 when each
    // factor entry has std (0.1)^(1/n) / r^(1/(2n)).
    const double sigma =
        std::pow(0.1, 1.0 / double(n)) / std::pow(double(shape_.rank), 1.0 / (2.0 * double(n)));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);

    factors_.reserve(shape_.rank * n);
    for (std::size_t k = 0; k < shape_.rank; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            Matrix f(t, q);
            for (double& v : f.data) v = dist(rng);
            factors_.push_back(std::move(f));
        }
    }

    if (norm_.mode == NormMode::per_component && n > 1) {
        if (norm_.per_node_params) {
            for (const auto& node : tree_.nodes) {
                node_norms_.emplace_back(node_dim(q, node.width()), norm_.epsilon);
            }
        } else {
            for (std::size_t width : tree_.level_widths) {
                node_norms_.emplace_back(node_dim(q, width), norm_.epsilon);
            }
        }
    } else if (norm_.mode == NormMode::after_sum && n > 1) {
        node_norms_.emplace_back(shape_.padded_dim(), norm_.epsilon);
    }
}

Matrix& KetXSOperator::factor(std::size_t k, std::size_t j) {
    return factors_[k * shape_.order + j];
}

const Matrix& KetXSOperator::factor(std::size_t k, std::size_t j) const {
    return factors_[k * shape_.order + j];
}

int KetXSOperator::norm_slot(int node_id) const {
    if (norm_.mode != NormMode::per_component) return -1;
    return norm_.per_node_params ? node_id
                                 : tree_.shared_slot[static_cast<std::size_t>(node_id)];
}

std::vector<std::size_t> KetXSOperator::row_digits(std::size_t word) const {
    require_index(word < shape_.vocab_size, "row_digits: word index out of range");
    std::vector<std::size_t> digits(shape_.order);
    row_digits_into(word, shape_.leaf_rows, digits);
    return digits;
}

Matrix KetXSOperator::gather_rows(std::span<const std::size_t> words, int threads,
                                  GatherStats* stats) const {
    for (std::size_t w : words)
        require_index(w < shape_.vocab_size, "gather_rows: word index out of range");
    const std::size_t dims[] = {words.size(), shape_.embed_dim};
    checked_product(dims, "gather_rows");
    Matrix out(words.size(), shape_.embed_dim);
    const bool plain = norm_.mode == NormMode::off;
    detail::parallel_chunks(
        words.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
            RowScratch scratch;
            scratch.digits.resize(shape_.order);
            if (plain) {
                scratch.buf.resize(shape_.padded_dim());
            } else {
                scratch.tree.prepare(tree_, shape_.leaf_dim, false);
            }
            for (std::size_t row = begin; row < end; ++row) {
                if (plain) {
                    gather_row_plain(*this, words[row], out.row(row), scratch);
                } else {
                    gather_row_normed(*this, words[row], out.row(row), scratch);
                }
            }
        });
    if (stats) {
        stats->output_elements = out.size();
        stats->scratch_elements_per_thread = plain ? shape_.padded_dim() : 0;
        if (!plain) {
            for (const auto& node : tree_.nodes) {
                stats->scratch_elements_per_thread += node_dim(shape_.leaf_dim, node.width());
            }
            stats->scratch_elements_per_thread += shape_.padded_dim();  // root accumulator
        }
        stats->threads_used = detail::chunk_count(words.size(), threads);
    }
    return out;
}

Matrix KetXSOperator::full_dense() const {
    const std::size_t dims[] = {shape_.vocab_size, shape_.embed_dim};
    checked_product(dims, "full_dense");
    std::vector<std::size_t> words(shape_.vocab_size);
    for (std::size_t i = 0; i < words.size(); ++i) words[i] = i;
    return gather_rows(words);
}

GradientBundle KetXSOperator::backward_rows(std::span<const std::size_t> words,
                                            const Matrix& upstream, int threads) const {
    require(upstream.rows == words.size() && upstream.cols == shape_.embed_dim,
            "backward_rows: upstream shape mismatch");
    for (std::size_t w : words)
        require_index(w < shape_.vocab_size, "backward_rows: word index out of range");

    const bool plain = norm_.mode == NormMode::off;
    const std::size_t chunks = detail::chunk_count(words.size(), threads);
    std::vector<GradientBundle> partial(chunks);
    for (auto& b : partial) b = zero_gradients();
    detail::parallel_chunks(
        words.size(), threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            RowScratch scratch;
            scratch.digits.resize(shape_.order);
            if (plain) {
                scratch.prefixes.resize(shape_.order);
                std::size_t len = shape_.leaf_dim;
                for (std::size_t m = 1; m < shape_.order; ++m) {
                    len *= shape_.leaf_dim;
                    scratch.prefixes[m].resize(len);
                }
            } else {
                scratch.tree.prepare(tree_, shape_.leaf_dim, true);
            }
            for (std::size_t row = begin; row < end; ++row) {
                if (plain) {
                    backward_row_plain(*this, words[row], upstream.row(row),
                                       partial[chunk], scratch);
                } else {
                    backward_row_normed(*this, words[row], upstream.row(row),
                                        partial[chunk], scratch);
                }
            }
        });

    GradientBundle result = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) result.accumulate(partial[c]);
    return result;
}

GradientBundle KetXSOperator::zero_gradients() const {
    GradientBundle bundle;
    for (const auto& f : factors_) bundle.arrays.emplace_back(f.size(), 0.0);
    for (const auto& norm : node_norms_) {
        bundle.arrays.emplace_back(norm.gain.size(), 0.0);
        bundle.arrays.emplace_back(norm.bias.size(), 0.0);
    }
    return bundle;
}

std::vector<std::span<double>> KetXSOperator::param_views() {
    std::vector<std::span<double>> views;
    for (auto& f : factors_) views.emplace_back(f.data);
    for (auto& norm : node_norms_) {
        views.emplace_back(norm.gain);
        views.emplace_back(norm.bias);
    }
    return views;
}

std::vector<std::span<const double>> KetXSOperator::param_views() const {
    std::vector<std::span<const double>> views;
    for (const auto& f : factors_) views.emplace_back(f.data);
    for (const auto& norm : node_norms_) {
        views.emplace_back(norm.gain);
        views.emplace_back(norm.bias);
    }
    return views;
}

std::size_t KetXSOperator::factor_param_count() const {
    return shape_.rank * shape_.order * shape_.leaf_dim * shape_.leaf_rows;
}

std::size_t KetXSOperator::norm_param_count() const {
    std::size_t count = 0;
    for (const auto& norm : node_norms_) count += norm.gain.size() + norm.bias.size();
    return count;
}

}  // namespace w2k
