// SPDX-License-Identifier: Apache-2.0
#include "w2k/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <utility>

namespace w2k {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Model>
Matrix gather_any(const Model& model, std::span<const std::size_t> words, int threads);

template <>
Matrix gather_any(const KetEmbedding& model, std::span<const std::size_t> words,
                  int threads) {
    return model.gather_batch(words, threads);
}

template <>
Matrix gather_any(const KetXSOperator& model, std::span<const std::size_t> words,
                  int threads) {
    return model.gather_rows(words, threads);
}

template <typename Model>
GradientBundle backward_any(const Model& model, std::span<const std::size_t> words,
                            const Matrix& upstream, int threads);

template <>
GradientBundle backward_any(const KetEmbedding& model,
                            std::span<const std::size_t> words, const Matrix& upstream,
                            int threads) {
    return model.backward_batch(words, upstream, threads);
}

template <>
GradientBundle backward_any(const KetXSOperator& model,
                            std::span<const std::size_t> words, const Matrix& upstream,
                            int threads) {
    return model.backward_rows(words, upstream, threads);
}

double masked_mse(const Matrix& reconstructed, const Matrix& target, std::size_t rows) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < target.cols; ++j) {
            const double d = reconstructed(i, j) - target(i, j);
            sum += d * d;
        }
    }
    return sum / (double(rows) * double(target.cols));
}

template <typename Model>
FitReport fit_dense_impl(const Matrix& target, Model& model, OptimizerState& opt,
                         const FitOptions& options) {
    const FactoredShape& shape = model.shape();
    require(target.cols == shape.embed_dim, "fit_dense: target column count mismatch");
    const std::size_t loss_rows = options.mask_rows_at == 0
                                      ? target.rows
                                      : std::min(target.rows, options.mask_rows_at);
    require(loss_rows >= 1, "fit_dense: no rows in the loss");
    require(loss_rows <= shape.vocab_size, "fit_dense: more loss rows than the vocabulary");

    const bool full_sweep =
        options.batch_rows == 0 || options.batch_rows >= loss_rows;
    std::vector<std::size_t> all_rows(loss_rows);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    std::vector<std::size_t> batch(full_sweep ? loss_rows : options.batch_rows);
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, loss_rows - 1);

    FitReport report;
    report.param_count = 0;
    for (const auto& view : std::as_const(model).param_views()) report.param_count += view.size();
    report.space_saving_rate =
        double(shape.vocab_size) * double(shape.embed_dim) / double(report.param_count);
    report.mse_history.reserve(options.epochs);
    report.wall_history.reserve(options.epochs);

    const auto start = Clock::now();
    Matrix upstream;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::span<const std::size_t> rows;
        if (full_sweep) {
            rows = all_rows;
        } else {
            for (auto& b : batch) b = pick(rng);
            rows = batch;
        }

        Matrix out = gather_any(model, rows, options.threads);
        const double inv_count = 1.0 / (double(rows.size()) * double(target.cols));
        double batch_loss = 0.0;
        upstream.rows = out.rows;
        upstream.cols = out.cols;
        upstream.data.resize(out.size());
        for (std::size_t b = 0; b < rows.size(); ++b) {
            const double* t = target.data.data() + rows[b] * target.cols;
            const double* o = out.data.data() + b * out.cols;
            double* u = upstream.data.data() + b * out.cols;
            for (std::size_t j = 0; j < out.cols; ++j) {
                const double diff = o[j] - t[j];
                batch_loss += diff * diff;
                u[j] = 2.0 * diff * inv_count;
            }
        }
        batch_loss *= inv_count;

        GradientBundle grads = backward_any(model, rows, upstream, options.threads);
        opt.step(model.param_views(), grads);

        double recorded = batch_loss;
        if (options.record_full_mse) {
            Matrix full = gather_any(model, all_rows, options.threads);
            recorded = masked_mse(full, target, loss_rows);
        }
        report.mse_history.push_back(recorded);
        report.wall_history.push_back(seconds_since(start));
    }

    report.iterations = options.epochs;
    if (report.mse_history.empty()) {
        const Matrix full = gather_any(model, all_rows, options.threads);
        report.final_mse = masked_mse(full, target, loss_rows);
    } else {
        report.final_mse = report.mse_history.back();
    }
    report.wall_time = seconds_since(start);
    return report;
}

template <typename Model>
double grad_check_impl(Model& model, std::span<const std::size_t> words,
                       std::uint64_t seed) {
    const std::size_t p = model.shape().embed_dim;
    Matrix upstream(words.size(), p);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : upstream.data) v = dist(rng);

    const GradientBundle analytic = backward_any(model, words, upstream, 1);

    auto loss = [&]() {
        const Matrix out = gather_any(model, words, 1);
        double sum = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) sum += out.data[i] * upstream.data[i];
        return sum;
    };

    const double h = 1e-5;
    double max_rel = 0.0;
    auto views = model.param_views();
    for (std::size_t a = 0; a < views.size(); ++a) {
        for (std::size_t i = 0; i < views[a].size(); ++i) {
            double& theta = views[a][i];
            const double saved = theta;
            theta = saved + h;
            const double up = loss();
            theta = saved - h;
            const double down = loss();
            theta = saved;
            const double fd = (up - down) / (2.0 * h);
            const double g = analytic.arrays[a][i];
            const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

template <typename Model>
double retrieval_probe_impl(const Matrix& original, const Model& compressed,
                            std::size_t k, std::uint64_t seed,
                            std::size_t num_queries) {
    const std::size_t d = original.rows;
    require(d >= 2, "retrieval_probe: need at least two rows");
    require(k >= 1 && k < d, "retrieval_probe: k must be in [1, rows)");

    std::vector<std::size_t> all_rows(d);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    const Matrix reconstructed = gather_any(compressed, all_rows, 0);
    require(reconstructed.cols == original.cols, "retrieval_probe: dim mismatch");

    std::vector<std::size_t> queries(d);
    std::iota(queries.begin(), queries.end(), std::size_t{0});
    if (num_queries < d) {
        std::mt19937_64 rng(seed);
        std::shuffle(queries.begin(), queries.end(), rng);
        queries.resize(num_queries);
    }

    auto top_k = [&](const Matrix& m, std::size_t query) {
        const auto q_row = m.row(query);
        const double q_norm = l2_norm(q_row);
        // (negated cosine, index): ties resolve to the lower index.
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(m.rows - 1);
        for (std::size_t i = 0; i < m.rows; ++i) {
            if (i == query) continue;
            const double denom = q_norm * l2_norm(m.row(i));
            const double cosine = denom > 0.0 ? dot(q_row, m.row(i)) / denom : -2.0;
            scored.emplace_back(-cosine, i);
        }
        std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k), scored.end());
        std::vector<std::size_t> ids(k);
        for (std::size_t i = 0; i < k; ++i) ids[i] = scored[i].second;
        std::sort(ids.begin(), ids.end());
        return ids;
    };

    double overlap_sum = 0.0;
    for (std::size_t query : queries) {
        const auto a = top_k(original, query);
        const auto b = top_k(reconstructed, query);
        std::vector<std::size_t> both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                              std::back_inserter(both));
        overlap_sum += double(both.size()) / double(k);
    }
    return overlap_sum / double(queries.size());
}

}  // namespace

void OptimizerState::step(std::vector<std::span<double>> params,
                          const GradientBundle& grads) {
    require(params.size() == grads.arrays.size(), "step: parameter/gradient count mismatch");
    for (std::size_t a = 0; a < params.size(); ++a) {
        require(params[a].size() == grads.arrays[a].size(), "step: array shape mismatch");
    }

    if (kind == OptimizerKind::sgd) {
        ++step_count;
        for (std::size_t a = 0; a < params.size(); ++a) {
            for (std::size_t i = 0; i < params[a].size(); ++i) {
                params[a][i] -= learning_rate * grads.arrays[a][i];
            }
        }
        return;
    }

    if (m.empty()) {
        m.resize(params.size());
        v.resize(params.size());
        for (std::size_t a = 0; a < params.size(); ++a) {
            m[a].assign(params[a].size(), 0.0);
            v[a].assign(params[a].size(), 0.0);
        }
    }
    require(m.size() == params.size(), "step: optimizer state does not match parameters");

    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, double(step_count));
    const double bc2 = 1.0 - std::pow(beta2, double(step_count));
    for (std::size_t a = 0; a < params.size(); ++a) {
        for (std::size_t i = 0; i < params[a].size(); ++i) {
            const double g = grads.arrays[a][i];
            m[a][i] = beta1 * m[a][i] + (1.0 - beta1) * g;
            v[a][i] = beta2 * v[a][i] + (1.0 - beta2) * g * g;
            const double m_hat = m[a][i] / bc1;
            const double v_hat = v[a][i] / bc2;
            params[a][i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
        }
    }
}

FitReport fit_dense(const Matrix& target, KetXSOperator& model, OptimizerState& opt,
                    const FitOptions& options) {
    require(target.rows <= model.shape().padded_rows(),
            "fit_dense: target has more rows than the padded vocabulary");
    return fit_dense_impl(target, model, opt, options);
}

FitReport fit_dense(const Matrix& target, KetEmbedding& model, OptimizerState& opt,
                    const FitOptions& options) {
    require(target.rows <= model.shape().vocab_size,
            "fit_dense: target has more rows than the vocabulary");
    return fit_dense_impl(target, model, opt, options);
}

double grad_check(KetEmbedding& model, std::span<const std::size_t> words,
                  std::uint64_t seed) {
    return grad_check_impl(model, words, seed);
}

double grad_check(KetXSOperator& model, std::span<const std::size_t> words,
                  std::uint64_t seed) {
    return grad_check_impl(model, words, seed);
}

double retrieval_probe(const Matrix& original, const KetXSOperator& compressed,
                       std::size_t k, std::uint64_t seed, std::size_t num_queries) {
    return retrieval_probe_impl(original, compressed, k, seed, num_queries);
}

double retrieval_probe(const Matrix& original, const KetEmbedding& compressed,
                       std::size_t k, std::uint64_t seed, std::size_t num_queries) {
    return retrieval_probe_impl(original, compressed, k, seed, num_queries);
}

void write_fit_log(const FitReport& report, std::ostream& out) {
    out << "epoch\tmse\twall_seconds\n";
    for (std::size_t e = 0; e < report.mse_history.size(); ++e) {
        out << e << '\t' << report.mse_history[e] << '\t' << report.wall_history[e]
            << '\n';
    }
}

}  // namespace w2k
