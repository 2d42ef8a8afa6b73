// SPDX-License-Identifier: Apache-2.0
#include "w2k/ket.hpp"

#include <cmath>
#include <random>

#include "par_util.hpp"
#include "tree_eval.hpp"

namespace w2k {

namespace {

struct WordScratch {
    detail::TreeScratch tree;
    std::vector<std::span<const double>> leaves;
    std::vector<Vector> d_leaves;
};

const LayerNormParams* ket_norm_at(const KetEmbedding& e, int node_id) {
    const int slot = e.norm_slot(node_id);
    return slot >= 0 ? &e.node_norms()[slot] : nullptr;
}

void gather_one(const KetEmbedding& e, std::size_t word, std::span<double> out,
                WordScratch& s) {
    const FactoredShape& shape = e.shape();
    const std::size_t qn = shape.padded_dim();
    s.leaves.resize(shape.order);
    s.tree.acc.assign(qn, 0.0);
    auto norm_at = [&](int id) { return ket_norm_at(e, id); };
    for (std::size_t k = 0; k < shape.rank; ++k) {
        for (std::size_t j = 0; j < shape.order; ++j) s.leaves[j] = e.leaf(word, k, j);
        auto comp = detail::tree_component_forward(e.tree(), s.leaves, norm_at,
                                                   s.tree, false);
        for (std::size_t c = 0; c < qn; ++c) s.tree.acc[c] += comp[c];
    }
    if (e.norm_config().mode == NormMode::after_sum && shape.order > 1) {
        layer_norm(s.tree.acc, e.node_norms()[0], s.tree.acc);
    }
    std::copy(s.tree.acc.begin(), s.tree.acc.begin() + static_cast<long>(out.size()),
              out.begin());
}

void backward_one(const KetEmbedding& e, std::size_t word,
                  std::span<const double> upstream_row, GradientBundle& bundle,
                  WordScratch& s) {
    const FactoredShape& shape = e.shape();
    const std::size_t q = shape.leaf_dim;
    const std::size_t qn = shape.padded_dim();
    const std::size_t r = shape.rank;
    const std::size_t n = shape.order;

    s.leaves.resize(n);
    s.d_leaves.resize(n);
    for (auto& v : s.d_leaves) v.resize(q);
    s.tree.d_acc.assign(qn, 0.0);
    std::copy(upstream_row.begin(), upstream_row.end(), s.tree.d_acc.begin());

    auto norm_at = [&](int id) { return ket_norm_at(e, id); };
    auto norm_grads = [&](int id) {
        const int slot = e.norm_slot(id);
        return std::pair<std::span<double>, std::span<double>>(
            bundle.arrays[1 + 2 * static_cast<std::size_t>(slot)],
            bundle.arrays[2 + 2 * static_cast<std::size_t>(slot)]);
    };

    if (e.norm_config().mode == NormMode::after_sum && n > 1) {
        // Rebuild the pre-norm root sum, then take the upstream gradient
        // through the final LayerNorm.
        s.tree.acc.assign(qn, 0.0);
        for (std::size_t k = 0; k < r; ++k) {
            for (std::size_t j = 0; j < n; ++j) s.leaves[j] = e.leaf(word, k, j);
            auto comp = detail::tree_component_forward(e.tree(), s.leaves, norm_at,
                                                       s.tree, false);
            for (std::size_t c = 0; c < qn; ++c) s.tree.acc[c] += comp[c];
        }
        LayerNormCache cache;
        Vector normed(qn);
        layer_norm(s.tree.acc, e.node_norms()[0], normed, &cache);
        layer_norm_backward(s.tree.d_acc, e.node_norms()[0], cache, s.tree.d_acc,
                            bundle.arrays[1], bundle.arrays[2]);
    }

    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t j = 0; j < n; ++j) s.leaves[j] = e.leaf(word, k, j);
        detail::tree_component_forward(e.tree(), s.leaves, norm_at, s.tree, true);
        detail::tree_component_backward(e.tree(), s.leaves, norm_at, norm_grads,
                                        s.tree.d_acc, s.tree, s.d_leaves);
        for (std::size_t j = 0; j < n; ++j) {
            double* grad = bundle.arrays[0].data() + ((word * r + k) * n + j) * q;
            for (std::size_t c = 0; c < q; ++c) grad[c] += s.d_leaves[j][c];
        }
    }
}

}  // namespace

KetEmbedding::KetEmbedding(FactoredShape shape, std::uint64_t seed, NormConfig norm)
    : shape_(shape), norm_(norm), tree_(shape.order) {
    shape_.leaf_rows = 0;
    shape_.validate(ModelKind::ket);

    const std::size_t n = shape_.order;
    const std::size_t q = shape_.leaf_dim;
    factors_.resize(shape_.vocab_size * shape_.rank * n * q);

    // Leaf std chosen so the reconstructed entries land near std 0.1.
    const double sigma = std::pow(0.1, 1.0 / double(n)) /
                         std::pow(double(q), (double(n) - 1.0) / (2.0 * double(n)));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (double& v : factors_) v = dist(rng);

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

std::span<double> KetEmbedding::leaf(std::size_t word, std::size_t k, std::size_t j) {
    const std::size_t q = shape_.leaf_dim;
    return {factors_.data() + ((word * shape_.rank + k) * shape_.order + j) * q, q};
}

std::span<const double> KetEmbedding::leaf(std::size_t word, std::size_t k,
                                           std::size_t j) const {
    const std::size_t q = shape_.leaf_dim;
    return {factors_.data() + ((word * shape_.rank + k) * shape_.order + j) * q, q};
}

int KetEmbedding::norm_slot(int node_id) const {
    if (norm_.mode != NormMode::per_component) return -1;
    return norm_.per_node_params ? node_id
                                 : tree_.shared_slot[static_cast<std::size_t>(node_id)];
}

Vector KetEmbedding::gather_word(std::size_t word) const {
    require_index(word < shape_.vocab_size, "gather_word: word index out of range");
    Vector out(shape_.embed_dim);
    WordScratch scratch;
    scratch.tree.prepare(tree_, shape_.leaf_dim, false);
    gather_one(*this, word, out, scratch);
    return out;
}

Matrix KetEmbedding::gather_batch(std::span<const std::size_t> words, int threads) const {
    for (std::size_t w : words)
        require_index(w < shape_.vocab_size, "gather_batch: word index out of range");
    const std::size_t dims[] = {words.size(), shape_.embed_dim};
    checked_product(dims, "gather_batch");
    Matrix out(words.size(), shape_.embed_dim);
    detail::parallel_chunks(words.size(), threads,
                            [&](std::size_t, std::size_t begin, std::size_t end) {
                                WordScratch scratch;
                                scratch.tree.prepare(tree_, shape_.leaf_dim, false);
                                for (std::size_t row = begin; row < end; ++row) {
                                    gather_one(*this, words[row], out.row(row), scratch);
                                }
                            });
    return out;
}

GradientBundle KetEmbedding::backward_batch(std::span<const std::size_t> words,
                                            const Matrix& upstream, int threads) const {
    require(upstream.rows == words.size() && upstream.cols == shape_.embed_dim,
            "backward_batch: upstream shape mismatch");
    for (std::size_t w : words)
        require_index(w < shape_.vocab_size, "backward_batch: word index out of range");

    const std::size_t chunks = detail::chunk_count(words.size(), threads);
    std::vector<GradientBundle> partial(chunks);
    for (auto& b : partial) b = zero_gradients();
    detail::parallel_chunks(words.size(), threads,
                            [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                                WordScratch scratch;
                                scratch.tree.prepare(tree_, shape_.leaf_dim, true);
                                for (std::size_t row = begin; row < end; ++row) {
                                    backward_one(*this, words[row], upstream.row(row),
                                                 partial[chunk], scratch);
                                }
                            });

    GradientBundle result = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) result.accumulate(partial[c]);
    return result;
}

GradientBundle KetEmbedding::zero_gradients() const {
    GradientBundle bundle;
    bundle.arrays.emplace_back(factors_.size(), 0.0);
    for (const auto& norm : node_norms_) {
        bundle.arrays.emplace_back(norm.gain.size(), 0.0);
        bundle.arrays.emplace_back(norm.bias.size(), 0.0);
    }
    return bundle;
}

std::vector<std::span<double>> KetEmbedding::param_views() {
    std::vector<std::span<double>> views;
    views.emplace_back(factors_);
    for (auto& norm : node_norms_) {
        views.emplace_back(norm.gain);
        views.emplace_back(norm.bias);
    }
    return views;
}

std::vector<std::span<const double>> KetEmbedding::param_views() const {
    std::vector<std::span<const double>> views;
    views.emplace_back(factors_);
    for (const auto& norm : node_norms_) {
        views.emplace_back(norm.gain);
        views.emplace_back(norm.bias);
    }
    return views;
}

std::size_t KetEmbedding::factor_param_count() const { return factors_.size(); }

std::size_t KetEmbedding::norm_param_count() const {
    std::size_t count = 0;
    for (const auto& norm : node_norms_) count += norm.gain.size() + norm.bias.size();
    return count;
}

}  // namespace w2k
