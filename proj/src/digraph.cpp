#include "netfdi/digraph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace netfdi {

int SystemDigraph::edge_count() const {
    int c = 0;
    for (const auto& s : adj) c += static_cast<int>(s.size());
    return c;
}

bool SystemDigraph::has_edge(int from, int to) const {
    const auto& s = adj[from];
    return std::find(s.begin(), s.end(), to) != s.end();
}

std::vector<int> SccDecomposition::parent_indices() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(is_parent.size()); ++i)
        if (is_parent[i]) out.push_back(i);
    return out;
}

SystemDigraph build_digraph(const StructuredMatrix& pattern) {
    SystemDigraph g;
    g.n = pattern.n;
    g.adj.assign(pattern.n, {});
    for (int i = 0; i < pattern.n; ++i)
        for (int j = 0; j < pattern.n; ++j)
            if (pattern.at(i, j)) g.adj[i].push_back(j);
    return g;
}

namespace {

// Iterative Tarjan; the recursion depth would otherwise be O(n).
struct TarjanState {
    const SystemDigraph& g;
    std::vector<int> index, lowlink;
    std::vector<bool> on_stack;
    std::vector<int> stack;
    int next_index = 0;
    std::vector<std::vector<int>> sccs;
    std::vector<int> component_of;

    explicit TarjanState(const SystemDigraph& graph)
        : g(graph),
          index(graph.n, -1),
          lowlink(graph.n, 0),
          on_stack(graph.n, false),
          component_of(graph.n, -1) {}

    void run(int root) {
        struct Frame {
            int v;
            size_t edge = 0;
        };
        std::vector<Frame> frames{{root}};
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!frames.empty()) {
            Frame& f = frames.back();
            const int v = f.v;
            if (f.edge < g.adj[v].size()) {
                const int w = g.adj[v][f.edge++];
                if (index[w] == -1) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w});
                } else if (on_stack[w]) {
                    lowlink[v] = std::min(lowlink[v], index[w]);
                }
            } else {
                if (lowlink[v] == index[v]) {
                    std::vector<int> scc;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        component_of[w] = static_cast<int>(sccs.size());
                        scc.push_back(w);
                    } while (w != v);
                    std::sort(scc.begin(), scc.end());
                    sccs.push_back(std::move(scc));
                }
                frames.pop_back();
                if (!frames.empty()) {
                    const int parent = frames.back().v;
                    lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
                }
            }
        }
    }
};

}  // namespace

SccDecomposition scc_decompose(const SystemDigraph& g) {
    TarjanState t(g);
    for (int v = 0; v < g.n; ++v)
        if (t.index[v] == -1) t.run(v);

    SccDecomposition dec;
    dec.sccs = std::move(t.sccs);
    dec.component_of = std::move(t.component_of);

    std::set<std::pair<int, int>> edges;
    for (int v = 0; v < g.n; ++v) {
        for (int w : g.adj[v]) {
            const int a = dec.component_of[v];
            const int b = dec.component_of[w];
            if (a != b) edges.insert({a, b});
        }
    }
    dec.condensation_edges.assign(edges.begin(), edges.end());
    dec.is_parent.assign(dec.sccs.size(), true);
    for (const auto& [a, b] : dec.condensation_edges) dec.is_parent[a] = false;
    return dec;
}

std::vector<int> equivalence_class(const SccDecomposition& dec, int state) {
    if (state < 0 || state >= static_cast<int>(dec.component_of.size()))
        throw std::out_of_range("equivalence_class: bad state index");
    const int c = dec.component_of[state];
    if (!dec.is_parent[c]) return {};
    return dec.sccs[c];
}

ReplacementVerdict replacement_candidates(const SccDecomposition& dec,
                                          const MeasurementModel& mm,
                                          int faulty_sensor) {
    if (faulty_sensor < 0 || faulty_sensor >= mm.count())
        throw std::out_of_range("replacement_candidates: bad sensor index");
    const int state = mm.sensors[faulty_sensor].measured_state;
    const auto klass = equivalence_class(dec, state);

    ReplacementVerdict v;
    if (klass.empty()) {
        v.kind = ReplacementKind::RemovalSafe;
        return v;
    }
    std::set<int> measured_by_healthy;
    for (int i = 0; i < mm.count(); ++i)
        if (i != faulty_sensor) measured_by_healthy.insert(mm.sensors[i].measured_state);
    for (int s : klass)
        if (s != state && !measured_by_healthy.count(s)) v.candidates.push_back(s);

    v.kind = v.candidates.empty() ? ReplacementKind::Irreplaceable
                                  : ReplacementKind::ReplaceWith;
    return v;
}

}  // namespace netfdi
