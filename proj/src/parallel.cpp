// SPDX-License-Identifier: Apache-2.0
#include "w2k/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace w2k {

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int resolve_threads(int requested) {
    if (requested <= 0) return hardware_threads();
    return requested;
}

}  // namespace w2k
