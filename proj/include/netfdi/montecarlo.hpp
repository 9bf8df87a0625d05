#pragma once

#include <cstdint>
#include <functional>

namespace netfdi {

/// Runs `count` independent replications. Each replication owns its own
/// seeded RNG stream, so the parallel schedule cannot change results; the
/// serial path is the reference the parallel one is tested against.
void run_replications(int count, bool parallel,
                      const std::function<void(int)>& body);

/// Replication seed derivation (splitmix64 step over base ^ index).
uint64_t replication_seed(uint64_t base, uint64_t index);

}  // namespace netfdi
