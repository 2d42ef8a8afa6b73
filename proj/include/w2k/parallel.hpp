// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace w2k {

/// Number of worker threads available to parallel kernels (1 without OpenMP).
int hardware_threads();

/// Maps a request to a concrete thread count: 0 = all available, otherwise
/// clamped to >= 1.
int resolve_threads(int requested);

}  // namespace w2k
