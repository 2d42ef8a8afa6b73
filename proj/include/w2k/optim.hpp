// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "w2k/dense.hpp"
#include "w2k/gradient.hpp"
#include "w2k/ket.hpp"
#include "w2k/ketxs.hpp"

namespace w2k {

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step_count = 0;

    // Adam moments, congruent to the parameter arrays; sized on first step.
    std::vector<Vector> m;
    std::vector<Vector> v;

    void step(std::vector<std::span<double>> params, const GradientBundle& grads);
};

struct FitOptions {
    std::size_t epochs = 1000;
    /// Rows sampled per step, uniformly with replacement. 0 or >= the number
    /// of rows in the loss means a deterministic full sweep every step.
    std::size_t batch_rows = 128;
    /// Rows at index >= mask_rows_at are excluded from the loss (phantom
    /// vocabulary padding). 0 means no mask.
    std::size_t mask_rows_at = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    /// Record the full masked-target MSE each epoch (otherwise the batch MSE
    /// is recorded). The final_mse entry always uses the full masked target.
    bool record_full_mse = true;
};

struct FitReport {
    std::size_t iterations = 0;
    double final_mse = 0.0;
    std::vector<double> mse_history;    // one entry per epoch
    std::vector<double> wall_history;   // cumulative seconds at each epoch
    double wall_time = 0.0;
    std::size_t param_count = 0;
    double space_saving_rate = 0.0;
};

/// Minimizes the mean squared error between gathered rows and target rows.
FitReport fit_dense(const Matrix& target, KetXSOperator& model,
                    OptimizerState& opt, const FitOptions& options);
FitReport fit_dense(const Matrix& target, KetEmbedding& model,
                    OptimizerState& opt, const FitOptions& options);

/// Central-difference check of the analytic backward pass on a random
/// upstream matrix; returns the max over parameters of
/// |fd - analytic| / max(|fd|, |analytic|, 1e-8).
double grad_check(KetEmbedding& model, std::span<const std::size_t> words,
                  std::uint64_t seed);
double grad_check(KetXSOperator& model, std::span<const std::size_t> words,
                  std::uint64_t seed);

/// Mean top-k cosine-neighbor overlap |A ∩ B| / k between the original rows
/// and the gathered compressed rows, over `num_queries` sampled query rows
/// (self excluded from both neighbor sets). Chance level is ~k/d.
double retrieval_probe(const Matrix& original, const KetXSOperator& compressed,
                       std::size_t k, std::uint64_t seed = 1234,
                       std::size_t num_queries = 100);
double retrieval_probe(const Matrix& original, const KetEmbedding& compressed,
                       std::size_t k, std::uint64_t seed = 1234,
                       std::size_t num_queries = 100);

/// Line-delimited text log, one record per epoch: epoch, mse, wall seconds.
void write_fit_log(const FitReport& report, std::ostream& out);

}  // namespace w2k
