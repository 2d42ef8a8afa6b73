// SPDX-License-Identifier: Apache-2.0
#include "w2k/text_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace w2k {

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(std::move(tok));
    return tokens;
}

bool is_positive_integer(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

double parse_value(const std::string& token, std::size_t line_no) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(token, &consumed);
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + token + "'");
    }
    if (consumed != token.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + token + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value '" + token + "'");
    }
    return value;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::size_t Vocab::add(std::string token) {
    const auto [it, inserted] = index.emplace(token, tokens.size());
    if (!inserted) throw ParseError("duplicate token '" + token + "'");
    tokens.push_back(std::move(token));
    return it->second;
}

std::optional<std::size_t> Vocab::find(std::string_view token) const {
    const auto it = index.find(std::string(token));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

TextEmbeddings load_text_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);

    TextEmbeddings result;
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    std::string line;
    bool first_content_line = true;

    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (first_content_line) {
            first_content_line = false;
            // word2vec-style "d p" header: exactly two integer tokens.
            if (tokens.size() == 2 && is_positive_integer(tokens[0]) &&
                is_positive_integer(tokens[1])) {
                continue;
            }
        }
        if (tokens.size() < 2) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected a token and at least one value");
        }
        if (dim == 0) {
            dim = tokens.size() - 1;
        } else if (tokens.size() - 1 != dim) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " values, got " +
                             std::to_string(tokens.size() - 1));
        }
        try {
            result.vocab.add(tokens[0]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        for (std::size_t i = 1; i < tokens.size(); ++i) {
            values.push_back(parse_value(tokens[i], line_no));
        }
    }
    if (result.vocab.size() == 0) {
        throw ParseError("no embedding rows in " + path);
    }
    result.matrix = Matrix(result.vocab.size(), dim, std::move(values));
    return result;
}

void save_text_embeddings(const std::string& path, const Vocab& vocab,
                          const Matrix& matrix) {
    require(vocab.size() == matrix.rows, "save_text_embeddings: vocab/matrix row mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open embedding file for writing: " + path);
    char buf[40];
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        out << vocab.tokens[i];
        for (std::size_t j = 0; j < matrix.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", matrix(i, j));
            out << ' ' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing embedding file: " + path);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocab file: " + path);
    Vocab vocab;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = split_tokens(line);
        if (tokens.empty()) continue;
        if (first_content_line) {
            first_content_line = false;
            if (tokens.size() == 2 && is_positive_integer(tokens[0]) &&
                is_positive_integer(tokens[1])) {
                continue;
            }
        }
        try {
            vocab.add(tokens[0]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (vocab.size() == 0) throw ParseError("no tokens in " + path);
    return vocab;
}

std::vector<std::string> nearest_tokens(const Vocab& vocab, std::string_view token,
                                        std::size_t count) {
    std::vector<std::pair<std::size_t, std::size_t>> scored;  // (distance, index)
    scored.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        scored.emplace_back(edit_distance(token, vocab.tokens[i]), i);
    }
    const std::size_t keep = std::min(count, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep),
                      scored.end());
    std::vector<std::string> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(vocab.tokens[scored[i].second]);
    return out;
}

}  // namespace w2k
