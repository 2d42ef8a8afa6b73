// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "w2k/dense.hpp"

namespace w2k {

/// Malformed file contents (ragged rows, duplicate tokens, bad numbers).
class ParseError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem-level failure; the message carries the path.
class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return tokens.size(); }
    std::size_t add(std::string token);  // ParseError on duplicate
    std::optional<std::size_t> find(std::string_view token) const;
};

struct TextEmbeddings {
    Vocab vocab;
    Matrix matrix;
};

/// Whitespace-separated "token v1 ... vp" lines; an optional leading
/// "d p" header (two integer tokens) is auto-detected and skipped.
TextEmbeddings load_text_embeddings(const std::string& path);

/// Writes tokens and values with round-trippable precision.
void save_text_embeddings(const std::string& path, const Vocab& vocab,
                          const Matrix& matrix);

/// First whitespace-separated token of every line (embedding files work too).
Vocab load_vocab(const std::string& path);

/// Up to `count` vocabulary tokens closest to `token` in edit distance.
std::vector<std::string> nearest_tokens(const Vocab& vocab, std::string_view token,
                                        std::size_t count = 5);

}  // namespace w2k
