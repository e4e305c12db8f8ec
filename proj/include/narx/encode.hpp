#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "narx/graph.hpp"

namespace narx {

using LabelId = std::uint32_t;

// Dense label ids for neighbour patterns, shared across a corpus so repeated
// patterns in different graphs reuse the same id. Every id also carries a
// canonical key string built only from operator indices and structure, so two
// isomorphic graphs always receive identical canonical keys no matter the
// node numbering or table insertion order.
class LabelTable {
public:
    LabelId base_label(std::uint32_t op_index) {
        return intern("o" + std::to_string(op_index));
    }

    LabelId refine(LabelId own_prev, std::vector<LabelId> parent_prev,
                   std::vector<LabelId> child_prev = {}) {
        std::sort(parent_prev.begin(), parent_prev.end(),
                  [this](LabelId a, LabelId b) { return canon_[a] < canon_[b]; });
        std::string key = "(" + canon_[own_prev] + "|";
        for (std::size_t i = 0; i < parent_prev.size(); ++i) {
            if (i) key += ",";
            key += canon_[parent_prev[i]];
        }
        if (!child_prev.empty()) {
            std::sort(child_prev.begin(), child_prev.end(),
                      [this](LabelId a, LabelId b) { return canon_[a] < canon_[b]; });
            key += ";";
            for (std::size_t i = 0; i < child_prev.size(); ++i) {
                if (i) key += ",";
                key += canon_[child_prev[i]];
            }
        }
        key += ")";
        return intern(key);
    }

    const std::string& canon(LabelId id) const { return canon_[id]; }
    std::size_t size() const { return canon_.size(); }

private:
    LabelId intern(const std::string& key) {
        auto it = ids_.find(key);
        if (it != ids_.end()) return it->second;
        LabelId id = static_cast<LabelId>(canon_.size());
        canon_.push_back(key);
        ids_.emplace(key, id);
        return id;
    }

    std::unordered_map<std::string, LabelId> ids_;
    std::vector<std::string> canon_;
};

struct EncodeConfig {
    std::uint32_t steps = 2;          // s
    bool include_children = false;    // neighbour set: parents only by default
};

// Per-node labels C^0..C^s plus the linearization used for subsequence
// mining.
struct EncodedSequence {
    std::vector<std::vector<LabelId>> labels_per_step;  // [k][node]
    std::vector<std::uint32_t> order;                   // linearized node ids
    std::vector<LabelId> linear_labels;                 // C^s along `order`

    const std::vector<LabelId>& final_labels() const {
        return labels_per_step.back();
    }
};

// One refinement step of the node encoding: each node's new label is keyed by
// its previous label plus the multiset of its neighbours' previous labels.
inline std::vector<LabelId> encode_step(
    const std::vector<std::vector<std::uint32_t>>& parents,
    const std::vector<std::vector<std::uint32_t>>& children,
    const std::vector<LabelId>& prev, LabelTable& table,
    bool include_children) {
    std::vector<LabelId> next(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        std::vector<LabelId> p;
        p.reserve(parents[i].size());
        for (auto j : parents[i]) p.push_back(prev[j]);
        std::vector<LabelId> c;
        if (include_children) {
            c.reserve(children[i].size());
            for (auto j : children[i]) c.push_back(prev[j]);
        }
        next[i] = table.refine(prev[i], std::move(p), std::move(c));
    }
    return next;
}

// Replace every nonzero adjacency entry (j,i) by the label of node j. Kept
// for inspection/debug dumps; the mining path works off parent lists.
inline DenseMatrix labeled_adjacency(const CompGraph& g,
                                     const std::vector<LabelId>& labels) {
    DenseMatrix m(g.num_nodes(), g.num_nodes(), 0.0);
    for (const auto& [s, d] : g.edges)
        m(s, d) = static_cast<double>(labels[s]) + 1.0;
    return m;
}

// Longest path from each node to a sink, used to band the linearization.
inline std::vector<std::uint32_t> dist_to_sink(const CompGraph& g) {
    auto order = topological_order(g);
    auto ch = g.children();
    std::vector<std::uint32_t> dist(g.num_nodes(), 0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        for (auto c : ch[*it]) dist[*it] = std::max(dist[*it], dist[c] + 1);
    }
    return dist;
}

// Topological linearization keyed by (longest distance to sink desc,
// canonical label asc, node id asc). The first two keys are graph
// invariants, so isomorphic graphs produce identical label sequences, and
// stacked blocks stay contiguous because each block occupies its own
// distance band.
inline std::vector<std::uint32_t> mining_order(const CompGraph& g,
                                               const std::vector<LabelId>& labels,
                                               const LabelTable& table) {
    const std::size_t m = g.num_nodes();
    auto ch = g.children();
    std::vector<std::uint32_t> indeg(m, 0);
    for (const auto& [s, d] : g.edges) ++indeg[d];
    auto dist = dist_to_sink(g);

    auto cmp = [&](std::uint32_t a, std::uint32_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];  // max-heap on dist
        const auto& ca = table.canon(labels[a]);
        const auto& cb = table.canon(labels[b]);
        if (ca != cb) return ca > cb;  // min on canon
        return a > b;                  // min on id
    };
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, decltype(cmp)>
        ready(cmp);
    for (std::uint32_t i = 0; i < m; ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<std::uint32_t> order;
    order.reserve(m);
    while (!ready.empty()) {
        std::uint32_t n = ready.top();
        ready.pop();
        order.push_back(n);
        for (auto c : ch[n])
            if (--indeg[c] == 0) ready.push(c);
    }
    if (order.size() != m) throw DataError("graph contains a cycle");
    return order;
}

// Run s refinement steps from C^0 = operator labels and linearize.
inline EncodedSequence encode(const CompGraph& g, const EncodeConfig& cfg,
                              LabelTable& table) {
    if (cfg.steps < 1) throw ConfigError("encoding steps must be >= 1");
    EncodedSequence seq;
    auto parents = g.parents();
    auto children = g.children();
    std::vector<LabelId> cur(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        cur[i] = table.base_label(g.node_ops[i]);
    seq.labels_per_step.push_back(cur);
    for (std::uint32_t k = 1; k <= cfg.steps; ++k) {
        cur = encode_step(parents, children, cur, table, cfg.include_children);
        seq.labels_per_step.push_back(cur);
    }
    seq.order = mining_order(g, cur, table);
    seq.linear_labels.reserve(g.num_nodes());
    for (auto n : seq.order) seq.linear_labels.push_back(cur[n]);
    return seq;
}

}  // namespace narx
