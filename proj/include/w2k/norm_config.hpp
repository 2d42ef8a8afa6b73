// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace w2k {

/// Where LayerNorm acts during tree evaluation.
///  - off:            no normalization anywhere.
///  - per_component:  every internal node normalizes each rank component's
///                    output; the root sum of components is left as-is.
///  - after_sum:      components are combined raw and one LayerNorm is
///                    applied to the summed root output (orders >= 2).
enum class NormMode { off, per_component, after_sum };

struct NormConfig {
    NormMode mode = NormMode::off;
    bool per_node_params = false;  // own gain/bias per node instead of per level
    double epsilon = 1e-5;
};

}  // namespace w2k
