// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "w2k/ket.hpp"
#include "w2k/ketxs.hpp"
#include "w2k/shape.hpp"

namespace w2k {

enum class ScalarWidth : std::uint16_t { f32 = 4, f64 = 8 };

/// Binary model file. Layout, all little-endian:
///   magic "W2KT", version u16, model kind u16 (1 = ket, 2 = ketxs),
///   scalar width u16 (4 or 8), d p n r q t as u64, factor arrays row-major
///   in (k, j) lexicographic order, then a u64 count of LayerNorm parameter
///   arrays followed by length-prefixed gain/bias arrays per norm slot
///   (count 0 when normalization is disabled).
void save_checkpoint(const std::string& path, const KetEmbedding& model,
                     ScalarWidth width = ScalarWidth::f64);
void save_checkpoint(const std::string& path, const KetXSOperator& model,
                     ScalarWidth width = ScalarWidth::f64);

struct LoadedModel {
    ModelKind kind = ModelKind::ket;
    ScalarWidth width = ScalarWidth::f64;
    std::unique_ptr<KetEmbedding> ket;
    std::unique_ptr<KetXSOperator> xs;

    const FactoredShape& shape() const;
    Matrix gather(std::span<const std::size_t> words, int threads = 0) const;
};

LoadedModel load_checkpoint(const std::string& path);

}  // namespace w2k
