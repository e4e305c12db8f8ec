#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "narx/matrix.hpp"
#include "narx/motif.hpp"

namespace narx {

// The original graph contracted so each motif occurrence becomes one node
// carrying the motif's embedding.
struct MacroGraph {
    std::vector<std::vector<double>> node_embeddings;  // one row per occurrence
    std::vector<Edge> edges;
    std::optional<int> label;

    std::size_t num_nodes() const { return node_embeddings.size(); }

    DenseMatrix feature_matrix() const {
        if (node_embeddings.empty()) return {};
        DenseMatrix f(node_embeddings.size(), node_embeddings[0].size());
        for (std::size_t i = 0; i < node_embeddings.size(); ++i)
            for (std::size_t j = 0; j < node_embeddings[i].size(); ++j)
                f(i, j) = node_embeddings[i][j];
        return f;
    }

    DenseMatrix adjacency_matrix() const {
        DenseMatrix a(num_nodes(), num_nodes(), 0.0);
        for (const auto& [s, d] : edges) a(s, d) = 1.0;
        return a;
    }
};

// Macro connectivity:
//  (a) a parent-graph edge crosses two cores -> directed macro edge, and
//  (b) two occurrences' expanded subgraphs share a parent-graph edge ->
//      macro edge from the topologically earlier core to the later one.
inline MacroGraph build_macro(const CompGraph& g,
                              const std::vector<MotifOccurrence>& occs,
                              const std::vector<std::vector<double>>& embeds) {
    if (occs.size() != embeds.size())
        throw DataError("build_macro: one embedding per occurrence required");
    if (!occs.empty()) {
        const std::size_t dim = embeds[0].size();
        for (const auto& e : embeds)
            if (e.size() != dim)
                throw NumericError("build_macro: embedding dimension mismatch");
    }

    const std::size_t m = g.num_nodes();
    std::vector<std::size_t> owner(m, MotifOccurrence::npos());
    for (std::size_t i = 0; i < occs.size(); ++i) {
        for (auto n : occs[i].core_nodes) {
            if (n >= m || owner[n] != MotifOccurrence::npos())
                throw DataError("build_macro: cores must partition the graph");
            owner[n] = i;
        }
    }
    for (std::size_t n = 0; n < m; ++n)
        if (owner[n] == MotifOccurrence::npos())
            throw DataError("build_macro: occurrences do not cover node " +
                            std::to_string(n));

    // topological precedence of cores: position of the earliest core node
    auto order = topological_order(g);
    std::vector<std::size_t> pos(m);
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    std::vector<std::size_t> core_pos(occs.size(), m);
    for (std::size_t i = 0; i < occs.size(); ++i)
        for (auto n : occs[i].core_nodes)
            core_pos[i] = std::min(core_pos[i], pos[n]);

    std::set<Edge> macro_edges;
    // rule (a): core-crossing edges
    for (const auto& [u, v] : g.edges) {
        std::size_t i = owner[u], j = owner[v];
        if (i != j)
            macro_edges.insert({static_cast<std::uint32_t>(i),
                                static_cast<std::uint32_t>(j)});
    }
    // rule (b): overlapped edges between expanded subgraphs
    std::vector<std::vector<bool>> in_expanded(occs.size(),
                                               std::vector<bool>(m, false));
    for (std::size_t i = 0; i < occs.size(); ++i)
        for (auto n : occs[i].expanded_nodes) in_expanded[i][n] = true;
    for (const auto& [u, v] : g.edges) {
        for (std::size_t i = 0; i < occs.size(); ++i) {
            if (!in_expanded[i][u] || !in_expanded[i][v]) continue;
            for (std::size_t j = i + 1; j < occs.size(); ++j) {
                if (!in_expanded[j][u] || !in_expanded[j][v]) continue;
                std::size_t a = i, b = j;
                if (core_pos[b] < core_pos[a]) std::swap(a, b);
                if (a != b)
                    macro_edges.insert({static_cast<std::uint32_t>(a),
                                        static_cast<std::uint32_t>(b)});
            }
        }
    }

    MacroGraph mg;
    mg.node_embeddings = embeds;
    mg.label = g.label;
    for (const auto& e : macro_edges)
        if (e.first != e.second) mg.edges.push_back(e);
    return mg;
}

}  // namespace narx
