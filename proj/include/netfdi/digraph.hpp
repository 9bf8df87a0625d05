#pragma once

#include <set>
#include <vector>

#include "netfdi/system_model.hpp"

namespace netfdi {

/// System digraph: one node per state, nonzero A_ij gives the edge i -> j.
struct SystemDigraph {
    int n = 0;
    std::vector<std::vector<int>> adj;  // adj[i] = successors of i

    int edge_count() const;
    bool has_edge(int from, int to) const;
};

struct SccDecomposition {
    std::vector<std::vector<int>> sccs;        // each sorted ascending
    std::vector<int> component_of;             // node -> scc index
    std::vector<std::pair<int, int>> condensation_edges;
    std::vector<bool> is_parent;               // no outgoing condensation edge

    std::vector<int> parent_indices() const;
};

SystemDigraph build_digraph(const StructuredMatrix& pattern);

/// Tarjan single-pass SCC decomposition with condensation and parent flags.
SccDecomposition scc_decompose(const SystemDigraph& g);

/// States observationally equivalent to `state`: its parent SCC, or empty
/// if the state lies in no parent SCC.
std::vector<int> equivalence_class(const SccDecomposition& dec, int state);

enum class ReplacementKind { ReplaceWith, RemovalSafe, Irreplaceable };

struct ReplacementVerdict {
    ReplacementKind kind = ReplacementKind::RemovalSafe;
    std::vector<int> candidates;  // ascending, excludes already-measured states
};

ReplacementVerdict replacement_candidates(const SccDecomposition& dec,
                                          const MeasurementModel& mm,
                                          int faulty_sensor);

}  // namespace netfdi
