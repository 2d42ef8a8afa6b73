// SPDX-License-Identifier: Apache-2.0
// Internal: deterministic chunked parallel-for. Work is split into one
// contiguous chunk per worker; the partition depends only on (count,
// threads), so reductions that combine per-chunk results in chunk order are
// reproducible run to run, and threads == 1 reproduces the serial order
// bitwise.
#pragma once

#include <cstddef>

#include "w2k/parallel.hpp"

namespace w2k::detail {

/// Number of chunks parallel_chunks will use for (count, threads).
inline std::size_t chunk_count(std::size_t count, int threads) {
    const std::size_t nt = static_cast<std::size_t>(resolve_threads(threads));
    const std::size_t chunks = nt < count ? nt : count;
    return chunks == 0 ? 1 : chunks;
}

/// body(chunk_index, begin, end) over [0, count) split into `chunks` pieces.
template <typename Body>
void parallel_chunks(std::size_t count, int threads, Body&& body) {
    const std::size_t chunks = chunk_count(count, threads);
    if (chunks <= 1) {
        if (count > 0) body(std::size_t{0}, std::size_t{0}, count);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(static_cast<int>(chunks))
#endif
    for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
        const std::size_t begin = count * static_cast<std::size_t>(c) / chunks;
        const std::size_t end = count * (static_cast<std::size_t>(c) + 1) / chunks;
        body(static_cast<std::size_t>(c), begin, end);
    }
}

}  // namespace w2k::detail
