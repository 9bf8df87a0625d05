#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "netfdi/system_model.hpp"

namespace netfdi {

enum class ConsensusWeightRule { Uniform, SeededRandom };

/// Directed sensor communication graph with its row-stochastic consensus
/// matrix W. Edge j -> i means sensor j sends to sensor i, so row i of W
/// is supported on the in-neighborhood of i plus i itself.
struct SensorNetwork {
    int size = 0;
    std::vector<std::pair<int, int>> edges;  // (from, to), self-loops included
    Matrix W;

    std::vector<int> in_neighborhood(int i) const;  // N_beta(i), includes i
};

SensorNetwork build_row_stochastic(int num_sensors,
                                   const std::vector<std::pair<int, int>>& edges,
                                   ConsensusWeightRule rule, uint64_t seed = 0);

bool is_strongly_connected(int num_nodes,
                           const std::vector<std::pair<int, int>>& edges);

/// Undirected cycle 1<->2<->...<->N<->1 with self-loops.
std::vector<std::pair<int, int>> cycle_edges(int num_sensors);

/// Adds condensation-linking edges until the graph is strongly connected;
/// returns the edges added.
std::vector<std::pair<int, int>> repair_strong_connectivity(
    int num_nodes, std::vector<std::pair<int, int>>& edges);

}  // namespace netfdi
