#include "netfdi/sensor_network.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "netfdi/digraph.hpp"

namespace netfdi {

namespace {

SystemDigraph to_digraph(int num_nodes, const std::vector<std::pair<int, int>>& edges) {
    SystemDigraph g;
    g.n = num_nodes;
    g.adj.assign(num_nodes, {});
    for (const auto& [from, to] : edges) {
        if (from < 0 || from >= num_nodes || to < 0 || to >= num_nodes)
            throw std::out_of_range("edge endpoint out of range");
        if (!g.has_edge(from, to)) g.adj[from].push_back(to);
    }
    return g;
}

}  // namespace

std::vector<int> SensorNetwork::in_neighborhood(int i) const {
    std::set<int> nb{i};
    for (const auto& [from, to] : edges)
        if (to == i) nb.insert(from);
    return {nb.begin(), nb.end()};
}

SensorNetwork build_row_stochastic(int num_sensors,
                                   const std::vector<std::pair<int, int>>& edges,
                                   ConsensusWeightRule rule, uint64_t seed) {
    if (num_sensors <= 0) throw std::invalid_argument("empty sensor graph");

    for (const auto& [from, to] : edges)
        if (from < 0 || from >= num_sensors || to < 0 || to >= num_sensors)
            throw std::out_of_range("edge endpoint out of range");

    SensorNetwork net;
    net.size = num_sensors;
    net.edges = edges;
    for (int i = 0; i < num_sensors; ++i) {
        bool has_self = false;
        for (const auto& [from, to] : net.edges)
            if (from == i && to == i) has_self = true;
        if (!has_self) net.edges.emplace_back(i, i);
    }

    std::mt19937_64 rng(seed);
    // bounded away from zero so the support of W stays exact
    std::uniform_real_distribution<double> draw(0.1, 1.0);

    net.W = Matrix::Zero(num_sensors, num_sensors);
    for (int i = 0; i < num_sensors; ++i) {
        const auto nb = net.in_neighborhood(i);
        if (rule == ConsensusWeightRule::Uniform) {
            for (int j : nb) net.W(i, j) = 1.0 / static_cast<double>(nb.size());
        } else {
            double sum = 0.0;
            for (int j : nb) {
                net.W(i, j) = draw(rng);
                sum += net.W(i, j);
            }
            for (int j : nb) net.W(i, j) /= sum;
        }
    }
    return net;
}

bool is_strongly_connected(int num_nodes,
                           const std::vector<std::pair<int, int>>& edges) {
    if (num_nodes <= 0) return false;
    return scc_decompose(to_digraph(num_nodes, edges)).sccs.size() == 1;
}

std::vector<std::pair<int, int>> cycle_edges(int num_sensors) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < num_sensors; ++i) {
        edges.emplace_back(i, i);
        const int j = (i + 1) % num_sensors;
        if (j != i) {
            edges.emplace_back(i, j);
            edges.emplace_back(j, i);
        }
    }
    return edges;
}

std::vector<std::pair<int, int>> repair_strong_connectivity(
    int num_nodes, std::vector<std::pair<int, int>>& edges) {
    std::vector<std::pair<int, int>> added;
    while (true) {
        const auto dec = scc_decompose(to_digraph(num_nodes, edges));
        if (dec.sccs.size() <= 1) break;

        // link a sink component back to a source component
        std::vector<bool> has_out(dec.sccs.size(), false), has_in(dec.sccs.size(), false);
        for (const auto& [a, b] : dec.condensation_edges) {
            has_out[a] = true;
            has_in[b] = true;
        }
        int sink = -1, source = -1;
        for (int c = 0; c < static_cast<int>(dec.sccs.size()); ++c)
            if (!has_out[c] && sink < 0) sink = c;
        for (int c = 0; c < static_cast<int>(dec.sccs.size()); ++c)
            if (!has_in[c] && c != sink && source < 0) source = c;
        if (source < 0)
            for (int c = 0; c < static_cast<int>(dec.sccs.size()); ++c)
                if (c != sink && source < 0) source = c;
        const std::pair<int, int> e{dec.sccs[sink].front(), dec.sccs[source].front()};
        edges.push_back(e);
        added.push_back(e);
    }
    return added;
}

}  // namespace netfdi
