// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances and budgets are pinned in code.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "reference.hpp"
#include "w2k/checkpoint.hpp"
#include "w2k/kron.hpp"
#include "w2k/optim.hpp"
#include "w2k/text_io.hpp"

using namespace w2k;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const char* summary, bool ok, double seconds,
            double budget_seconds, const std::string& detail) {
    if (seconds > budget_seconds) ok = false;
    std::printf("criterion %d %s (%.2fs / budget %.0fs) %s%s%s\n", criterion,
                ok ? "PASS" : "FAIL", seconds, budget_seconds, summary,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++g_failures;
}

template <typename Fn>
void run_criterion(int criterion, const char* summary, double budget_seconds, Fn&& fn) {
    std::string detail;
    const auto start = Clock::now();
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report(criterion, summary, ok, seconds, budget_seconds, detail);
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

std::string run_cli(const std::string& args) {
    const std::string out_path =
        (std::filesystem::temp_directory_path() / "w2k_acceptance_cli.txt").string();
    const std::string command = std::string(W2K_CLI_PATH) + " " + args + " > " + out_path;
    if (std::system(command.c_str()) != 0) return "";
    std::ifstream in(out_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---- criterion 1: parameter counts and space-saving rates -----------------

struct CountRow {
    ModelKind kind;
    std::size_t d, p, baseline_p, n, r;
    std::size_t want_count;
    long long want_rate;
};

bool criterion_counts(std::string& detail) {
    // Vocabulary sizes recovered from the reference dense parameter counts:
    // 7,789,568/256, 8,194,816/256, and 118,655 as given.
    const CountRow rows[] = {
        {ModelKind::ket, 30428, 256, 256, 4, 1, 486848, 16},
        {ModelKind::ketxs, 30428, 400, 256, 2, 10, 70000, 111},
        {ModelKind::ketxs, 30428, 256, 256, 4, 1, 224, 34775},
        {ModelKind::ketxs, 32011, 400, 256, 2, 30, 214800, 38},
        {ModelKind::ketxs, 32011, 400, 256, 2, 10, 71600, 114},
        {ModelKind::ketxs, 32011, 1000, 256, 3, 10, 9600, 853},
        {ModelKind::ketxs, 118655, 300, 300, 2, 2, 24840, 1433},
        {ModelKind::ketxs, 118655, 300, 300, 4, 1, 380, 93675},
    };
    for (const CountRow& row : rows) {
        const FactoredShape shape = solve_shape(row.d, row.p, row.n, row.r, row.kind);
        const ParamCountReport report =
            param_count_report(shape, row.kind, false, row.baseline_p);
        if (report.count != row.want_count) {
            detail = "count mismatch for d=" + std::to_string(row.d) + " n/r " +
                     std::to_string(row.n) + "/" + std::to_string(row.r) + ": got " +
                     std::to_string(report.count) + ", want " +
                     std::to_string(row.want_count);
            return false;
        }
        // The reference rates mix floor and round; accept the quoted integer
        // when it is one of the two and within 1 of the exact ratio.
        const double exact = report.space_saving_rate;
        const long long floor_rate = static_cast<long long>(std::floor(exact));
        const long long round_rate = std::llround(exact);
        const bool rate_ok = (row.want_rate == floor_rate || row.want_rate == round_rate) &&
                             std::abs(exact - double(row.want_rate)) < 1.0;
        if (!rate_ok) {
            detail = "rate mismatch for count " + std::to_string(row.want_count) +
                     ": exact " + std::to_string(exact) + ", want " +
                     std::to_string(row.want_rate);
            return false;
        }
    }

    // Single-word rank-5 order-4 embedding: twenty 4-dim leaf vectors.
    const FactoredShape fig1_ket = solve_shape(1, 256, 4, 5, ModelKind::ket);
    if (fig1_ket.leaf_dim != 4 ||
        param_count_report(fig1_ket, ModelKind::ket).count != 80) {
        detail = "single-word rank-5 order-4 layout must use 80 parameters";
        return false;
    }
    // 81 x 16 matrix from twenty 3 x 2 factor matrices.
    const FactoredShape fig1_xs = solve_shape(81, 16, 4, 5, ModelKind::ketxs);
    if (fig1_xs.leaf_dim != 2 || fig1_xs.leaf_rows != 3 ||
        param_count_report(fig1_xs, ModelKind::ketxs).count != 120) {
        detail = "81x16 rank-5 order-4 layout must use 120 parameters";
        return false;
    }

    // The CLI surface agrees with the library on every reproducible row.
    for (const CountRow& row : rows) {
        const std::string args = std::string("stats --mode ") +
                                 (row.kind == ModelKind::ket ? "ket" : "xs") + " -d " +
                                 std::to_string(row.d) + " -p " + std::to_string(row.p) +
                                 " -n " + std::to_string(row.n) + " -r " +
                                 std::to_string(row.r) + " --baseline-dim " +
                                 std::to_string(row.baseline_p);
        const std::string out = run_cli(args);
        if (out.find("parameters        " + std::to_string(row.want_count)) ==
            std::string::npos) {
            detail = "cli stats count mismatch for " + args;
            return false;
        }
    }
    const std::string stats =
        run_cli("stats --mode xs -d 30428 -p 400 -n 2 -r 10 --baseline-dim 256");
    if (stats.find("space saving rate 111") == std::string::npos) {
        detail = "cli stats rate mismatch";
        return false;
    }
    const std::string stats_ket = run_cli("stats --mode ket -d 30428 -p 256 -n 4 -r 1");
    if (stats_ket.find("parameters        486848") == std::string::npos ||
        stats_ket.find("space saving rate 16") == std::string::npos) {
        detail = "cli ket stats output mismatch";
        return false;
    }
    return true;
}

// ---- criterion 2: lazy gather vs brute-force reconstruction ---------------

bool criterion_oracle(std::string& detail) {
    std::mt19937_64 rng(20240801);
    std::size_t configs = 0;
    double worst = 0.0;
    while (configs < 200) {
        const std::size_t n = 1 + rng() % 4;
        const std::size_t r = 1 + rng() % 5;
        const std::size_t q = 2 + rng() % 4;  // [2, 5]
        const std::size_t t = 2 + rng() % 4;
        FactoredShape shape;
        shape.order = n;
        shape.rank = r;
        shape.leaf_dim = q;
        shape.leaf_rows = t;
        const std::size_t qn = shape.padded_dim();
        const std::size_t tn = shape.padded_rows();
        shape.embed_dim = 1 + rng() % qn;
        shape.vocab_size = 1 + rng() % tn;
        if (shape.vocab_size < 2) continue;

        const KetXSOperator op(shape, rng());
        const Matrix dense = ref::xs_dense(op);
        std::vector<std::size_t> all(shape.vocab_size);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const Matrix got = op.gather_rows(all);
        for (std::size_t i = 0; i < got.size(); ++i) {
            const double rel = std::abs(got.data[i] - dense.data[i]) /
                               std::max({std::abs(got.data[i]), std::abs(dense.data[i]), 1.0});
            worst = std::max(worst, rel);
            if (rel > 1e-12) {
                detail = "gather/oracle mismatch, rel " + std::to_string(rel);
                return false;
            }
        }
        ++configs;
    }

    std::normal_distribution<double> dist(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a(1 + rng() % 5, 1 + rng() % 5);
        Matrix b(1 + rng() % 5, 1 + rng() % 5);
        for (auto& v : a.data) v = dist(rng);
        for (auto& v : b.data) v = dist(rng);
        const Matrix full = kron_mat(a, b);
        for (std::size_t i = 0; i < full.rows; ++i) {
            for (std::size_t j = 0; j < full.cols; ++j) {
                if (kron_entry(a, b, i, j) != full(i, j)) {
                    detail = "kron_entry deviates from kron_mat";
                    return false;
                }
            }
        }
    }
    detail = "200 configs, worst rel " + sci(worst);
    return true;
}

// ---- criterion 3: factored inner products ----------------------------------

bool criterion_inner(std::string& detail) {
    std::mt19937_64 rng(333);
    std::normal_distribution<double> dist(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 4;
        const std::size_t rv = 1 + rng() % 4;
        const std::size_t rw = 1 + rng() % 4;
        std::vector<std::size_t> dims(n);
        for (auto& d : dims) d = 1 + rng() % 5;

        auto grid = [&](std::size_t rank) {
            std::vector<std::vector<Vector>> g(rank);
            for (auto& comp : g) {
                for (std::size_t j = 0; j < n; ++j) {
                    Vector v(dims[j]);
                    for (auto& x : v) x = dist(rng);
                    comp.push_back(std::move(v));
                }
            }
            return g;
        };
        const auto v = grid(rv);
        const auto w = grid(rw);

        auto reconstruct = [&](const std::vector<std::vector<Vector>>& g) {
            Vector sum;
            for (const auto& comp : g) {
                const Vector dense = simple_tensor_to_dense({comp});
                if (sum.empty()) sum.assign(dense.size(), 0.0);
                for (std::size_t i = 0; i < dense.size(); ++i) sum[i] += dense[i];
            }
            return sum;
        };
        const double dense = dot(reconstruct(v), reconstruct(w));
        const double factored = factored_inner(v, w);
        const double rel = std::abs(dense - factored) /
                           std::max({std::abs(dense), std::abs(factored), 1.0});
        worst = std::max(worst, rel);
        if (rel > 1e-10) {
            detail = "factored inner product off by rel " + std::to_string(rel);
            return false;
        }
    }
    detail = "1000 grids, worst rel " + sci(worst);
    return true;
}

// ---- criterion 4: gradient correctness -------------------------------------

bool criterion_gradients(std::string& detail) {
    double worst = 0.0;
    for (std::size_t n : {1, 2, 3}) {
        for (std::size_t r : {1, 2, 3}) {
            for (std::size_t q : {2, 4}) {
                for (bool norm_on : {false, true}) {
                    FactoredShape shape;
                    shape.vocab_size = 3;
                    shape.order = n;
                    shape.rank = r;
                    shape.leaf_dim = q;
                    shape.embed_dim = shape.padded_dim();
                    NormConfig config;
                    config.mode = norm_on ? NormMode::per_component : NormMode::off;
                    KetEmbedding model(shape, 9000 + n * 100 + r * 10 + q, config);
                    const std::vector<std::size_t> words{0, 2, 1, 2};
                    const double err = grad_check(model, words, 17 + n + r + q);
                    worst = std::max(worst, err);
                    if (err > 1e-6) {
                        detail = "ket grad error " + std::to_string(err) + " at n=" +
                                 std::to_string(n) + " r=" + std::to_string(r) +
                                 " q=" + std::to_string(q) +
                                 (norm_on ? " norm on" : " norm off");
                        return false;
                    }
                }
            }
        }
    }
    for (std::size_t n : {1, 2, 3}) {
        for (std::size_t r : {1, 2}) {
            for (std::size_t q : {2, 3}) {
                for (std::size_t t : {2, 3}) {
                    FactoredShape shape;
                    shape.order = n;
                    shape.rank = r;
                    shape.leaf_dim = q;
                    shape.leaf_rows = t;
                    shape.embed_dim = shape.padded_dim();
                    shape.vocab_size = shape.padded_rows();
                    KetXSOperator model(shape, 8000 + n * 100 + r * 10 + q + t);
                    const std::vector<std::size_t> words{0, shape.vocab_size - 1,
                                                         shape.vocab_size / 2};
                    const double err = grad_check(model, words, 29 + n + r + q + t);
                    worst = std::max(worst, err);
                    if (err > 1e-6) {
                        detail = "xs grad error " + std::to_string(err) + " at n=" +
                                 std::to_string(n) + " r=" + std::to_string(r) +
                                 " q=" + std::to_string(q) + " t=" + std::to_string(t);
                        return false;
                    }
                }
            }
        }
    }
    detail = "worst max-rel " + sci(worst);
    return true;
}

// ---- criterion 5: realizable compression fit --------------------------------

bool criterion_fit(std::string& detail) {
    const FactoredShape shape = solve_shape(81, 16, 4, 5, ModelKind::ketxs);
    const KetXSOperator source(shape, 1000);
    const Matrix target = source.full_dense();

    KetXSOperator model(shape, 2000);
    OptimizerState opt;
    opt.kind = OptimizerKind::adam;
    opt.learning_rate = 1e-2;
    FitOptions options;
    options.epochs = 2000;
    options.batch_rows = 0;  // deterministic full sweep
    options.seed = 0;
    options.threads = 1;
    const FitReport report = fit_dense(target, model, opt, options);
    detail = "final mse " + sci(report.final_mse) + " after " +
             std::to_string(report.iterations) + " steps";
    return report.final_mse <= 1e-6 && report.iterations <= 2000;
}

// ---- criterion 6: retrieval sanity ------------------------------------------

bool criterion_retrieval(std::string& detail) {
    // 1,000 x 50 matrix: ten Gaussian clusters of 100 consecutive rows.
    std::mt19937_64 rng(77);
    std::normal_distribution<double> unit(0.0, 1.0);
    const std::size_t d = 1000, p = 50, clusters = 10;
    std::vector<Vector> centers(clusters, Vector(p));
    for (auto& c : centers) {
        for (auto& v : c) v = unit(rng);
    }
    Matrix target(d, p);
    for (std::size_t i = 0; i < d; ++i) {
        const Vector& c = centers[i / (d / clusters)];
        for (std::size_t j = 0; j < p; ++j) target(i, j) = c[j] + 0.3 * unit(rng);
    }

    const FactoredShape shape = solve_shape(d, p, 2, 4, ModelKind::ketxs);
    KetXSOperator model(shape, 42);
    OptimizerState opt;
    opt.learning_rate = 1e-2;
    FitOptions options;
    options.epochs = 2000;
    options.batch_rows = 128;
    options.mask_rows_at = d;
    options.seed = 7;
    options.threads = 1;
    options.record_full_mse = false;
    fit_dense(target, model, opt, options);

    const std::size_t k = 10;
    const double overlap = retrieval_probe(target, model, k, 1234);
    const double chance = double(k) / double(d);
    detail = "overlap " + sci(overlap) + " vs 10x chance " + sci(10.0 * chance);
    return overlap >= 10.0 * chance;
}

// ---- criterion 7: memory accounting -----------------------------------------

bool criterion_memory(std::string& detail) {
    const std::size_t d = 81, p = 16, n = 4, r = 5, batch = 32;
    const FactoredShape shape = solve_shape(d, p, n, r, ModelKind::ketxs);
    const KetXSOperator op(shape, 3);
    std::mt19937_64 rng(4);
    std::vector<std::size_t> words(batch);
    for (auto& w : words) w = rng() % d;

    GatherStats stats;
    op.gather_rows(words, 1, &stats);
    const std::size_t qn = shape.padded_dim();
    const std::size_t transient = stats.output_elements + stats.scratch_elements_per_thread;
    if (stats.output_elements != batch * p) {
        detail = "output accounting mismatch";
        return false;
    }
    if (transient > batch * p + qn) {
        detail = "transient " + std::to_string(transient) + " exceeds b*p+q^n " +
                 std::to_string(batch * p + qn);
        return false;
    }
    if (op.factor_param_count() != r * n * shape.leaf_dim * shape.leaf_rows ||
        op.factor_param_count() != 120) {
        detail = "parameter storage is not r*n*q*t";
        return false;
    }
    const std::size_t dense_bytes = d * p * sizeof(double);
    if (dense_bytes != 10368) {
        detail = "dense baseline bytes mismatch";
        return false;
    }
    const std::string bench = run_cli("bench -d 81 -p 16 -n 4 -r 5 -b 32 --reps 2");
    if (bench.empty() || bench.find("FAIL") != std::string::npos) {
        detail = "bench command reported a violation";
        return false;
    }
    detail = "transient " + std::to_string(transient) + " <= " +
             std::to_string(batch * p + qn) + ", params 120, dense 10368 bytes";
    return true;
}

// ---- criterion 8: checkpoint round-trip --------------------------------------

bool criterion_checkpoint(std::string& detail) {
    const auto dir = std::filesystem::temp_directory_path();
    auto read_bytes = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    for (ScalarWidth width : {ScalarWidth::f64, ScalarWidth::f32}) {
        FactoredShape ket_sh;
        ket_sh.vocab_size = 7;
        ket_sh.embed_dim = 14;
        ket_sh.order = 2;
        ket_sh.rank = 2;
        ket_sh.leaf_dim = 4;
        const KetEmbedding ket(ket_sh, 51, {NormMode::per_component, false, 1e-5});
        const std::string a = (dir / "acc_ket_a.w2kt").string();
        const std::string b = (dir / "acc_ket_b.w2kt").string();
        save_checkpoint(a, ket, width);
        const LoadedModel loaded = load_checkpoint(a);
        save_checkpoint(b, *loaded.ket, width);
        if (read_bytes(a) != read_bytes(b)) {
            detail = "ket round-trip bytes differ";
            return false;
        }

        const FactoredShape xs_sh = solve_shape(81, 16, 4, 5, ModelKind::ketxs);
        const KetXSOperator xs(xs_sh, 52);
        const std::string c = (dir / "acc_xs_a.w2kt").string();
        const std::string e = (dir / "acc_xs_b.w2kt").string();
        save_checkpoint(c, xs, width);
        const LoadedModel xs_loaded = load_checkpoint(c);
        save_checkpoint(e, *xs_loaded.xs, width);
        if (read_bytes(c) != read_bytes(e)) {
            detail = "xs round-trip bytes differ";
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    run_criterion(1, "parameter counts and space-saving rates", 1.0, criterion_counts);
    run_criterion(2, "lazy gather equals brute-force reconstruction", 10.0,
                  criterion_oracle);
    run_criterion(3, "factored inner product equals dense dot", 5.0, criterion_inner);
    run_criterion(4, "gradients match central finite differences", 120.0,
                  criterion_gradients);
    run_criterion(5, "realizable compression fit reaches 1e-6", 60.0, criterion_fit);
    run_criterion(6, "retrieval overlap beats 10x chance", 300.0, criterion_retrieval);
    run_criterion(7, "gather memory accounting", 1.0, criterion_memory);
    run_criterion(8, "checkpoint round-trip is bit-exact", 1.0, criterion_checkpoint);

    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
