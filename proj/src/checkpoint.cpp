// SPDX-License-Identifier: Apache-2.0
#include "w2k/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "w2k/text_io.hpp"

namespace w2k {

namespace {

constexpr char kMagic[4] = {'W', '2', 'K', 'T'};
constexpr std::uint16_t kVersion = 1;

class Writer {
public:
    Writer(const std::string& path, ScalarWidth width)
        : path_(path), width_(width), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open checkpoint for writing: " + path);
    }

    void bytes(const void* src, std::size_t count) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(count));
    }

    void u16(std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
        bytes(b, 2);
    }

    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        bytes(b, 8);
    }

    void scalar(double v) {
        if (width_ == ScalarWidth::f32) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            unsigned char b[4];
            for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            bytes(b, 4);
        } else {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            u64(bits);
        }
    }

    void array(std::span<const double> values) {
        for (double v : values) scalar(v);
    }

    void close() {
        out_.flush();
        if (!out_) throw IoError("failed writing checkpoint: " + path_);
    }

private:
    std::string path_;
    ScalarWidth width_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open checkpoint: " + path);
    }

    void bytes(void* dst, std::size_t count) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(count));
        if (in_.gcount() != static_cast<std::streamsize>(count)) {
            throw ParseError("truncated checkpoint: " + path_);
        }
    }

    std::uint16_t u16() {
        unsigned char b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
        return v;
    }

    double scalar(ScalarWidth width) {
        if (width == ScalarWidth::f32) {
            unsigned char b[4];
            bytes(b, 4);
            std::uint32_t bits = 0;
            for (int i = 0; i < 4; ++i) bits |= std::uint32_t(b[i]) << (8 * i);
            float f;
            std::memcpy(&f, &bits, 4);
            return double(f);
        }
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    void array(ScalarWidth width, std::span<double> values) {
        for (double& v : values) v = scalar(width);
    }

private:
    std::string path_;
    std::ifstream in_;
};

void write_header(Writer& w, ModelKind kind, ScalarWidth width, const FactoredShape& s) {
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u16(static_cast<std::uint16_t>(kind));
    w.u16(static_cast<std::uint16_t>(width));
    w.u64(s.vocab_size);
    w.u64(s.embed_dim);
    w.u64(s.order);
    w.u64(s.rank);
    w.u64(s.leaf_dim);
    w.u64(s.leaf_rows);
}

void write_norms(Writer& w, const std::vector<LayerNormParams>& norms) {
    w.u64(norms.size() * 2);
    for (const auto& norm : norms) {
        w.u64(norm.gain.size());
        w.array(norm.gain);
        w.u64(norm.bias.size());
        w.array(norm.bias);
    }
}

// Reconstructs the norm placement from the stored array lengths: the default
// shared-per-level layout is tried first, then per-node parameters, then a
// single root norm (the after-sum variant). The file format does not store
// the placement explicitly.
NormConfig infer_norm_config(const std::vector<std::size_t>& lens,
                             const FactoredShape& shape) {
    NormConfig config;
    if (lens.empty()) {
        config.mode = NormMode::off;
        return config;
    }
    const TreePlan plan(shape.order);
    auto matches = [&](const std::vector<std::size_t>& expected) {
        return lens == expected;
    };

    std::vector<std::size_t> shared;
    for (std::size_t width : plan.level_widths) {
        shared.push_back(node_dim(shape.leaf_dim, width));
        shared.push_back(node_dim(shape.leaf_dim, width));
    }
    if (matches(shared)) {
        config.mode = NormMode::per_component;
        return config;
    }

    std::vector<std::size_t> per_node;
    for (const auto& node : plan.nodes) {
        per_node.push_back(node_dim(shape.leaf_dim, node.width()));
        per_node.push_back(node_dim(shape.leaf_dim, node.width()));
    }
    if (matches(per_node)) {
        config.mode = NormMode::per_component;
        config.per_node_params = true;
        return config;
    }

    if (matches({shape.padded_dim(), shape.padded_dim()})) {
        config.mode = NormMode::after_sum;
        return config;
    }
    throw ParseError("checkpoint norm arrays do not match any known layout");
}

std::vector<std::vector<double>> read_norm_arrays(Reader& r, ScalarWidth width,
                                                  std::vector<std::size_t>& lens) {
    const std::uint64_t count = r.u64();
    if (count % 2 != 0) throw ParseError("checkpoint norm array count must be even");
    std::vector<std::vector<double>> arrays(count);
    lens.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t len = r.u64();
        lens[i] = len;
        arrays[i].resize(len);
        r.array(width, arrays[i]);
    }
    return arrays;
}

void apply_norm_arrays(std::vector<LayerNormParams>& norms,
                       const std::vector<std::vector<double>>& arrays) {
    if (arrays.size() != norms.size() * 2) {
        throw ParseError("checkpoint norm arrays do not match the model layout");
    }
    for (std::size_t s = 0; s < norms.size(); ++s) {
        if (arrays[2 * s].size() != norms[s].gain.size() ||
            arrays[2 * s + 1].size() != norms[s].bias.size()) {
            throw ParseError("checkpoint norm array length mismatch");
        }
        norms[s].gain = arrays[2 * s];
        norms[s].bias = arrays[2 * s + 1];
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const KetEmbedding& model,
                     ScalarWidth width) {
    const FactoredShape& s = model.shape();
    Writer w(path, width);
    write_header(w, ModelKind::ket, width, s);
    // One d x q array per (k, j).
    for (std::size_t k = 0; k < s.rank; ++k) {
        for (std::size_t j = 0; j < s.order; ++j) {
            for (std::size_t word = 0; word < s.vocab_size; ++word) {
                w.array(model.leaf(word, k, j));
            }
        }
    }
    write_norms(w, model.node_norms());
    w.close();
}

void save_checkpoint(const std::string& path, const KetXSOperator& model,
                     ScalarWidth width) {
    const FactoredShape& s = model.shape();
    Writer w(path, width);
    write_header(w, ModelKind::ketxs, width, s);
    for (std::size_t k = 0; k < s.rank; ++k) {
        for (std::size_t j = 0; j < s.order; ++j) {
            w.array(model.factor(k, j).data);
        }
    }
    write_norms(w, model.node_norms());
    w.close();
}

const FactoredShape& LoadedModel::shape() const {
    return kind == ModelKind::ket ? ket->shape() : xs->shape();
}

Matrix LoadedModel::gather(std::span<const std::size_t> words, int threads) const {
    return kind == ModelKind::ket ? ket->gather_batch(words, threads)
                                  : xs->gather_rows(words, threads);
}

LoadedModel load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("not a checkpoint file (bad magic): " + path);
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint16_t kind_raw = r.u16();
    if (kind_raw != 1 && kind_raw != 2) {
        throw ParseError("unknown model kind " + std::to_string(kind_raw));
    }
    const std::uint16_t width_raw = r.u16();
    if (width_raw != 4 && width_raw != 8) {
        throw ParseError("unsupported scalar width " + std::to_string(width_raw));
    }

    LoadedModel loaded;
    loaded.kind = static_cast<ModelKind>(kind_raw);
    loaded.width = static_cast<ScalarWidth>(width_raw);

    FactoredShape shape;
    shape.vocab_size = r.u64();
    shape.embed_dim = r.u64();
    shape.order = r.u64();
    shape.rank = r.u64();
    shape.leaf_dim = r.u64();
    shape.leaf_rows = r.u64();
    shape.validate(loaded.kind);

    if (loaded.kind == ModelKind::ket) {
        std::vector<std::vector<double>> factor_arrays(shape.rank * shape.order);
        for (auto& a : factor_arrays) {
            a.resize(shape.vocab_size * shape.leaf_dim);
            r.array(loaded.width, a);
        }
        std::vector<std::size_t> lens;
        const auto norm_arrays = read_norm_arrays(r, loaded.width, lens);
        const NormConfig config = infer_norm_config(lens, shape);
        loaded.ket = std::make_unique<KetEmbedding>(shape, 0, config);
        for (std::size_t k = 0; k < shape.rank; ++k) {
            for (std::size_t j = 0; j < shape.order; ++j) {
                const auto& a = factor_arrays[k * shape.order + j];
                for (std::size_t word = 0; word < shape.vocab_size; ++word) {
                    auto leaf = loaded.ket->leaf(word, k, j);
                    std::copy(a.begin() + static_cast<long>(word * shape.leaf_dim),
                              a.begin() + static_cast<long>((word + 1) * shape.leaf_dim),
                              leaf.begin());
                }
            }
        }
        apply_norm_arrays(loaded.ket->node_norms(), norm_arrays);
    } else {
        std::vector<std::vector<double>> factor_arrays(shape.rank * shape.order);
        for (auto& a : factor_arrays) {
            a.resize(shape.leaf_rows * shape.leaf_dim);
            r.array(loaded.width, a);
        }
        std::vector<std::size_t> lens;
        const auto norm_arrays = read_norm_arrays(r, loaded.width, lens);
        const NormConfig config = infer_norm_config(lens, shape);
        loaded.xs = std::make_unique<KetXSOperator>(shape, 0, config);
        for (std::size_t k = 0; k < shape.rank; ++k) {
            for (std::size_t j = 0; j < shape.order; ++j) {
                loaded.xs->factor(k, j).data = factor_arrays[k * shape.order + j];
            }
        }
        apply_norm_arrays(loaded.xs->node_norms(), norm_arrays);
    }
    return loaded;
}

}  // namespace w2k
