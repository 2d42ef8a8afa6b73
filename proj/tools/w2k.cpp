// SPDX-License-Identifier: Apache-2.0
// Command-line surface: stats, compress, reconstruct, query, gradcheck, bench.
// Exit codes: 0 success, 1 validation error, 2 I/O or parse error.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "w2k/checkpoint.hpp"
#include "w2k/kron.hpp"
#include "w2k/optim.hpp"
#include "w2k/parallel.hpp"
#include "w2k/text_io.hpp"

namespace {

using namespace w2k;

ModelKind parse_mode(const std::string& mode) {
    if (mode == "ket") return ModelKind::ket;
    if (mode == "xs") return ModelKind::ketxs;
    throw std::invalid_argument("mode must be 'ket' or 'xs'");
}

NormConfig norm_config_for(const std::string& layernorm, ModelKind kind) {
    NormConfig config;
    if (layernorm == "on") {
        config.mode = NormMode::per_component;
    } else if (layernorm == "off") {
        config.mode = NormMode::off;
    } else if (layernorm == "auto") {
        config.mode = kind == ModelKind::ket ? NormMode::per_component : NormMode::off;
    } else {
        throw std::invalid_argument("--layernorm must be 'on', 'off' or 'auto'");
    }
    return config;
}

ScalarWidth parse_scalar(const std::string& scalar) {
    if (scalar == "f32") return ScalarWidth::f32;
    if (scalar == "f64") return ScalarWidth::f64;
    throw std::invalid_argument("--scalar must be 'f32' or 'f64'");
}

struct StatsArgs {
    std::string mode = "xs";
    std::size_t d = 0, p = 0, n = 1, r = 1;
    std::size_t baseline_dim = 0;
    bool layernorm = false;
};

int run_stats(const StatsArgs& args) {
    const ModelKind kind = parse_mode(args.mode);
    const FactoredShape shape = solve_shape(args.d, args.p, args.n, args.r, kind);
    const ParamCountReport report =
        param_count_report(shape, kind, args.layernorm, args.baseline_dim);
    for (const std::string& warning : shape_warnings(shape)) {
        std::cerr << "note: " << warning << "\n";
    }
    std::printf("mode              %s\n", args.mode.c_str());
    std::printf("vocab (d)         %zu\n", shape.vocab_size);
    std::printf("dim (p)           %zu\n", shape.embed_dim);
    std::printf("order/rank        %zu/%zu\n", shape.order, shape.rank);
    std::printf("leaf dim (q)      %zu\n", shape.leaf_dim);
    if (kind == ModelKind::ketxs) std::printf("leaf rows (t)     %zu\n", shape.leaf_rows);
    std::printf("parameters        %zu\n", report.count);
    if (args.layernorm) std::printf("  layer norm      %zu\n", report.layer_norm_count);
    std::printf("space saving rate %lld (%.2f)\n", report.reported_rate,
                report.space_saving_rate);
    return 0;
}

struct CompressArgs {
    std::string input;
    std::string output;
    std::string mode = "xs";
    std::size_t n = 2, r = 1;
    std::size_t epochs = 2000;
    std::size_t batch_rows = 128;
    double lr = 1e-2;
    std::uint64_t seed = 0;
    std::string layernorm = "auto";
    std::string scalar = "f64";
    std::string optimizer = "adam";
    std::string log_path;
    int threads = 0;
};

int run_compress(const CompressArgs& args) {
    const ModelKind kind = parse_mode(args.mode);
    const ScalarWidth width = parse_scalar(args.scalar);
    const TextEmbeddings input = load_text_embeddings(args.input);
    const std::size_t d = input.matrix.rows;
    const std::size_t p = input.matrix.cols;
    const FactoredShape shape = solve_shape(d, p, args.n, args.r, kind);
    const NormConfig norm = norm_config_for(args.layernorm, kind);
    for (const std::string& warning : shape_warnings(shape)) {
        std::cerr << "note: " << warning << "\n";
    }

    OptimizerState opt;
    opt.kind = args.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
    opt.learning_rate = args.lr;
    FitOptions options;
    options.epochs = args.epochs;
    options.batch_rows = args.batch_rows;
    options.mask_rows_at = d;
    options.seed = args.seed;
    options.threads = args.threads;
    // History records the per-step batch MSE; the full-matrix MSE is
    // computed once at the end.
    options.record_full_mse = false;

    std::vector<std::size_t> all_rows(d);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    auto full_mse = [&](const Matrix& reconstructed) {
        double sum = 0.0;
        for (std::size_t i = 0; i < reconstructed.size(); ++i) {
            const double diff = reconstructed.data[i] - input.matrix.data[i];
            sum += diff * diff;
        }
        return sum / double(reconstructed.size());
    };

    FitReport report;
    double final_full_mse = 0.0;
    if (kind == ModelKind::ketxs) {
        KetXSOperator model(shape, args.seed, norm);
        report = fit_dense(input.matrix, model, opt, options);
        final_full_mse = full_mse(model.gather_rows(all_rows, args.threads));
        save_checkpoint(args.output, model, width);
    } else {
        KetEmbedding model(shape, args.seed, norm);
        report = fit_dense(input.matrix, model, opt, options);
        final_full_mse = full_mse(model.gather_batch(all_rows, args.threads));
        save_checkpoint(args.output, model, width);
    }

    if (!args.log_path.empty()) {
        std::ofstream log(args.log_path);
        if (!log) throw IoError("cannot open fit log for writing: " + args.log_path);
        write_fit_log(report, log);
    }

    std::printf("rows (d)          %zu\n", d);
    std::printf("dim (p)           %zu\n", p);
    std::printf("parameters        %zu\n", report.param_count);
    std::printf("space saving rate %.2f\n", report.space_saving_rate);
    std::printf("epochs            %zu\n", report.iterations);
    std::printf("final batch mse   %.6e\n", report.final_mse);
    std::printf("final full mse    %.6e\n", final_full_mse);
    std::printf("wall time (s)     %.3f\n", report.wall_time);
    std::printf("checkpoint        %s\n", args.output.c_str());
    return 0;
}

struct ReconstructArgs {
    std::string checkpoint;
    std::string output;
    std::string vocab_path;
    std::size_t block_size = 1024;
    int threads = 0;
};

int run_reconstruct(const ReconstructArgs& args) {
    const LoadedModel model = load_checkpoint(args.checkpoint);
    const std::size_t d = model.shape().vocab_size;

    std::vector<std::string> tokens;
    if (!args.vocab_path.empty()) {
        Vocab vocab = load_vocab(args.vocab_path);
        if (vocab.size() != d) {
            throw std::invalid_argument("vocab has " + std::to_string(vocab.size()) +
                                        " tokens but the checkpoint stores " +
                                        std::to_string(d) + " rows");
        }
        tokens = std::move(vocab.tokens);
    } else {
        tokens.reserve(d);
        for (std::size_t i = 0; i < d; ++i) tokens.push_back("w" + std::to_string(i));
    }

    std::ofstream out(args.output);
    if (!out) throw IoError("cannot open output file: " + args.output);
    char buf[40];
    std::vector<std::size_t> block;
    for (std::size_t begin = 0; begin < d; begin += args.block_size) {
        const std::size_t end = std::min(d, begin + args.block_size);
        block.resize(end - begin);
        std::iota(block.begin(), block.end(), begin);
        const Matrix rows = model.gather(block, args.threads);
        for (std::size_t i = 0; i < rows.rows; ++i) {
            out << tokens[begin + i];
            for (std::size_t j = 0; j < rows.cols; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
                out << ' ' << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("failed writing: " + args.output);
    std::printf("wrote %zu rows to %s\n", d, args.output.c_str());
    return 0;
}

struct QueryArgs {
    std::string checkpoint;
    std::string vocab_path;
    std::string token;
    std::size_t k = 10;
    std::size_t block_size = 1024;
    bool exclude_self = false;
    int threads = 0;
};

int run_query(const QueryArgs& args) {
    const LoadedModel model = load_checkpoint(args.checkpoint);
    const Vocab vocab = load_vocab(args.vocab_path);
    const std::size_t d = model.shape().vocab_size;
    if (vocab.size() != d) {
        throw std::invalid_argument("vocab has " + std::to_string(vocab.size()) +
                                    " tokens but the checkpoint stores " +
                                    std::to_string(d) + " rows");
    }
    const auto query_index = vocab.find(args.token);
    if (!query_index) {
        std::string message = "unknown token '" + args.token + "'; closest matches:";
        for (const auto& near : nearest_tokens(vocab, args.token)) message += " " + near;
        throw std::invalid_argument(message);
    }

    const Matrix query_row = model.gather(std::vector<std::size_t>{*query_index}, 1);
    const double query_norm = l2_norm(query_row.row(0));

    // Stream rows in blocks, keeping the best k seen so far.
    std::vector<std::pair<double, std::size_t>> best;  // (-cosine, index)
    std::vector<std::size_t> block;
    for (std::size_t begin = 0; begin < d; begin += args.block_size) {
        const std::size_t end = std::min(d, begin + args.block_size);
        block.resize(end - begin);
        std::iota(block.begin(), block.end(), begin);
        const Matrix rows = model.gather(block, args.threads);
        for (std::size_t i = 0; i < rows.rows; ++i) {
            const std::size_t index = begin + i;
            if (args.exclude_self && index == *query_index) continue;
            const double denom = query_norm * l2_norm(rows.row(i));
            const double cosine =
                denom > 0.0 ? dot(query_row.row(0), rows.row(i)) / denom : -2.0;
            best.emplace_back(-cosine, index);
        }
        std::sort(best.begin(), best.end());
        if (best.size() > args.k) best.resize(args.k);
    }

    for (std::size_t rank = 0; rank < best.size(); ++rank) {
        std::printf("%zu\t%s\t%.6f\n", rank + 1, vocab.tokens[best[rank].second].c_str(),
                    -best[rank].first);
    }
    return 0;
}

struct GradCheckArgs {
    std::string mode = "xs";
    std::size_t d = 9, p = 9, n = 2, r = 2;
    std::size_t words = 4;
    std::uint64_t seed = 0;
    std::string layernorm = "auto";
};

int run_gradcheck(const GradCheckArgs& args) {
    const ModelKind kind = parse_mode(args.mode);
    const FactoredShape shape = solve_shape(args.d, args.p, args.n, args.r, kind);
    const NormConfig norm = norm_config_for(args.layernorm, kind);

    std::mt19937_64 rng(args.seed);
    std::vector<std::size_t> words(args.words);
    for (auto& w : words) w = rng() % args.d;

    double max_rel = 0.0;
    std::size_t params = 0;
    if (kind == ModelKind::ketxs) {
        KetXSOperator model(shape, args.seed, norm);
        params = model.factor_param_count() + model.norm_param_count();
        max_rel = grad_check(model, words, args.seed + 1);
    } else {
        KetEmbedding model(shape, args.seed, norm);
        params = model.factor_param_count() + model.norm_param_count();
        max_rel = grad_check(model, words, args.seed + 1);
    }
    std::printf("parameters checked  %zu\n", params);
    std::printf("max relative error  %.3e\n", max_rel);
    std::printf("status              %s\n", max_rel <= 1e-6 ? "ok" : "SUSPECT");
    return max_rel <= 1e-6 ? 0 : 1;
}

struct BenchArgs {
    std::size_t d = 81, p = 16, n = 4, r = 5;
    std::size_t batch = 32;
    std::size_t reps = 5;
    std::uint64_t seed = 0;
    int threads = 0;
};

int run_bench(const BenchArgs& args) {
    const FactoredShape shape = solve_shape(args.d, args.p, args.n, args.r, ModelKind::ketxs);
    const KetXSOperator op(shape, args.seed);

    std::mt19937_64 rng(args.seed + 1);
    std::vector<std::size_t> words(args.batch);
    for (auto& w : words) w = rng() % args.d;

    const bool dense_fits = double(args.d) * double(args.p) <= double(element_budget());
    Matrix dense;
    if (dense_fits) dense = op.full_dense();

    using Clock = std::chrono::steady_clock;
    auto time_best = [&](auto&& fn) {
        double best = 1e300;
        for (std::size_t rep = 0; rep < args.reps; ++rep) {
            const auto start = Clock::now();
            fn();
            const double elapsed =
                std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            best = std::min(best, elapsed);
        }
        return best;
    };

    GatherStats stats;
    const double serial_ms = time_best([&] { op.gather_rows(words, 1, &stats); });
    const double parallel_ms = time_best([&] { op.gather_rows(words, args.threads); });
    double dense_ms = 0.0;
    if (dense_fits) {
        Matrix out(args.batch, args.p);
        dense_ms = time_best([&] {
            for (std::size_t b = 0; b < words.size(); ++b) {
                const auto row = dense.row(words[b]);
                std::copy(row.begin(), row.end(), out.row(b).begin());
            }
        });
    }

    const std::size_t qn = shape.padded_dim();
    const std::size_t factored_params = op.factor_param_count();
    const std::size_t dense_bytes = args.d * args.p * sizeof(double);
    const std::size_t transient = stats.output_elements + stats.scratch_elements_per_thread;
    const std::size_t transient_bound = args.batch * args.p + qn;

    std::printf("shape                     %zux%zu, order %zu, rank %zu (q=%zu, t=%zu)\n",
                args.d, args.p, args.n, args.r, shape.leaf_dim, shape.leaf_rows);
    std::printf("batch x reps              %zu x %zu\n", args.batch, args.reps);
    std::printf("dense storage             %zu elements (%zu bytes)\n", args.d * args.p,
                dense_bytes);
    std::printf("factored storage          %zu elements (%zu bytes)\n", factored_params,
                factored_params * sizeof(double));
    std::printf("factored transient        %zu elements (output %zu + scratch %zu)\n",
                transient, stats.output_elements, stats.scratch_elements_per_thread);
    std::printf("transient bound b*p+q^n   %zu elements\n", transient_bound);
    std::printf("gather serial             %.4f ms/batch\n", serial_ms);
    std::printf("gather %-2d threads         %.4f ms/batch\n",
                resolve_threads(args.threads), parallel_ms);
    if (dense_fits) {
        std::printf("gather dense baseline     %.4f ms/batch\n", dense_ms);
    } else {
        std::printf("gather dense baseline     skipped (exceeds element budget)\n");
    }

    bool ok = true;
    if (transient > transient_bound) {
        std::printf("FAIL transient %zu exceeds bound %zu\n", transient, transient_bound);
        ok = false;
    }
    if (factored_params != shape.rank * shape.order * shape.leaf_dim * shape.leaf_rows) {
        std::printf("FAIL parameter count mismatch\n");
        ok = false;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"factored (word2ket / word2ketXS) embedding toolkit"};
    app.require_subcommand(1);

    StatsArgs stats;
    CLI::App* stats_cmd = app.add_subcommand("stats", "parameter counts and space saving");
    stats_cmd->add_option("--mode", stats.mode, "ket or xs")->capture_default_str();
    stats_cmd->add_option("-d,--vocab", stats.d, "vocabulary size")->required();
    stats_cmd->add_option("-p,--dim", stats.p, "embedding dimension")->required();
    stats_cmd->add_option("-n,--order", stats.n, "tensor order")->required();
    stats_cmd->add_option("-r,--rank", stats.r, "tensor rank")->required();
    stats_cmd->add_option("--baseline-dim", stats.baseline_dim,
                          "dense baseline dim for the saving rate (default: -p)");
    stats_cmd->add_flag("--layernorm", stats.layernorm, "include LayerNorm parameters");

    CompressArgs compress;
    CLI::App* compress_cmd =
        app.add_subcommand("compress", "fit a factored model to a text embedding file");
    compress_cmd->add_option("-i,--input", compress.input, "text embedding file")->required();
    compress_cmd->add_option("-o,--output", compress.output, "checkpoint path")->required();
    compress_cmd->add_option("--mode", compress.mode, "ket or xs")->capture_default_str();
    compress_cmd->add_option("-n,--order", compress.n)->capture_default_str();
    compress_cmd->add_option("-r,--rank", compress.r)->capture_default_str();
    compress_cmd->add_option("--epochs", compress.epochs)->capture_default_str();
    compress_cmd->add_option("--batch-rows", compress.batch_rows)->capture_default_str();
    compress_cmd->add_option("--lr", compress.lr)->capture_default_str();
    compress_cmd->add_option("--seed", compress.seed)->capture_default_str();
    compress_cmd->add_option("--layernorm", compress.layernorm, "on, off or auto")
        ->capture_default_str();
    compress_cmd->add_option("--scalar", compress.scalar, "f32 or f64")->capture_default_str();
    compress_cmd->add_option("--optimizer", compress.optimizer, "adam or sgd")
        ->capture_default_str();
    compress_cmd->add_option("--log", compress.log_path, "per-epoch fit log (TSV)");
    compress_cmd->add_option("--threads", compress.threads, "0 = all")->capture_default_str();

    ReconstructArgs reconstruct;
    CLI::App* reconstruct_cmd =
        app.add_subcommand("reconstruct", "expand a checkpoint to a text embedding file");
    reconstruct_cmd->add_option("-c,--checkpoint", reconstruct.checkpoint)->required();
    reconstruct_cmd->add_option("-o,--output", reconstruct.output)->required();
    reconstruct_cmd->add_option("--vocab", reconstruct.vocab_path,
                                "token file (defaults to w0, w1, ...)");
    reconstruct_cmd->add_option("--block-size", reconstruct.block_size)->capture_default_str();
    reconstruct_cmd->add_option("--threads", reconstruct.threads)->capture_default_str();

    QueryArgs query;
    CLI::App* query_cmd = app.add_subcommand("query", "nearest neighbors by cosine");
    query_cmd->add_option("-c,--checkpoint", query.checkpoint)->required();
    query_cmd->add_option("--vocab", query.vocab_path)->required();
    query_cmd->add_option("-t,--token", query.token)->required();
    query_cmd->add_option("-k", query.k)->capture_default_str();
    query_cmd->add_option("--block-size", query.block_size)->capture_default_str();
    query_cmd->add_flag("--exclude-self", query.exclude_self);
    query_cmd->add_option("--threads", query.threads)->capture_default_str();

    GradCheckArgs gradcheck;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
    gradcheck_cmd->add_option("--mode", gradcheck.mode)->capture_default_str();
    gradcheck_cmd->add_option("-d,--vocab", gradcheck.d)->capture_default_str();
    gradcheck_cmd->add_option("-p,--dim", gradcheck.p)->capture_default_str();
    gradcheck_cmd->add_option("-n,--order", gradcheck.n)->capture_default_str();
    gradcheck_cmd->add_option("-r,--rank", gradcheck.r)->capture_default_str();
    gradcheck_cmd->add_option("--words", gradcheck.words)->capture_default_str();
    gradcheck_cmd->add_option("--seed", gradcheck.seed)->capture_default_str();
    gradcheck_cmd->add_option("--layernorm", gradcheck.layernorm)->capture_default_str();

    BenchArgs bench;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "gather latency and memory accounting (xs)");
    bench_cmd->add_option("-d,--vocab", bench.d)->capture_default_str();
    bench_cmd->add_option("-p,--dim", bench.p)->capture_default_str();
    bench_cmd->add_option("-n,--order", bench.n)->capture_default_str();
    bench_cmd->add_option("-r,--rank", bench.r)->capture_default_str();
    bench_cmd->add_option("-b,--batch", bench.batch)->capture_default_str();
    bench_cmd->add_option("--reps", bench.reps)->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
    bench_cmd->add_option("--threads", bench.threads)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(stats_cmd)) return run_stats(stats);
        if (app.got_subcommand(compress_cmd)) return run_compress(compress);
        if (app.got_subcommand(reconstruct_cmd)) return run_reconstruct(reconstruct);
        if (app.got_subcommand(query_cmd)) return run_query(query);
        if (app.got_subcommand(gradcheck_cmd)) return run_gradcheck(gradcheck);
        if (app.got_subcommand(bench_cmd)) return run_bench(bench);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
