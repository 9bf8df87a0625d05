#include "netfdi/montecarlo.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace netfdi {

uint64_t replication_seed(uint64_t base, uint64_t index) {
    uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void run_replications(int count, bool parallel, const std::function<void(int)>& body) {
#ifdef _OPENMP
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
#else
    (void)parallel;
#endif
    for (int i = 0; i < count; ++i) body(i);
}

}  // namespace netfdi
