#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "narx/errors.hpp"
#include "narx/matrix.hpp"

namespace narx {

// Operator label alphabet. Index 0 is always the reserved "UNK" sentinel that
// long-tail operator names fall back to.
class OperatorVocab {
public:
    static constexpr std::size_t kUnkIndex = 0;

    OperatorVocab() { add("UNK"); }

    explicit OperatorVocab(const std::vector<std::string>& names) {
        add("UNK");
        for (const auto& n : names)
            if (n != "UNK") add(n);
    }

    std::size_t add(const std::string& name) {
        auto it = lookup_.find(name);
        if (it != lookup_.end()) return it->second;
        std::size_t idx = entries_.size();
        entries_.push_back(name);
        lookup_.emplace(name, idx);
        return idx;
    }

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = lookup_.find(name);
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(std::size_t idx) const {
        if (idx >= entries_.size()) throw DataError("vocab index out of range");
        return entries_[idx];
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<std::string>& entries() const { return entries_; }

    // One operator name per line, line number = index. "UNK" is inserted at
    // index 0 when the file does not list it first.
    static OperatorVocab load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open vocab file: " + path);
        OperatorVocab v;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            v.add(line);
        }
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write vocab file: " + path);
        for (const auto& e : entries_) out << e << "\n";
    }

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

struct GraphMeta {
    std::string model_name;
    std::string repo_name;
    std::string task_name;
    std::uint64_t flops = 0;
    std::uint64_t params = 0;

    bool operator==(const GraphMeta&) const = default;
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

// Directed acyclic computational graph: one operator index per node plus the
// edge list. Immutable after validate().
struct CompGraph {
    std::vector<std::uint32_t> node_ops;  // vocab indices
    std::vector<Edge> edges;              // (src, dst)
    GraphMeta meta;
    std::optional<int> label;

    std::size_t num_nodes() const { return node_ops.size(); }

    bool operator==(const CompGraph&) const = default;

    // Structural checks: endpoints in range, no self/duplicate edges.
    // Acyclicity is checked by topological_order.
    void validate() const {
        const std::size_t m = node_ops.size();
        std::set<Edge> seen;
        for (const auto& [s, d] : edges) {
            if (s >= m || d >= m)
                throw DataError("edge endpoint out of range: (" +
                                std::to_string(s) + "," + std::to_string(d) +
                                ") with " + std::to_string(m) + " nodes");
            if (s == d) throw DataError("self-edge at node " + std::to_string(s));
            if (!seen.insert({s, d}).second)
                throw DataError("duplicate edge (" + std::to_string(s) + "," +
                                std::to_string(d) + ")");
        }
    }

    std::vector<std::vector<std::uint32_t>> parents() const {
        std::vector<std::vector<std::uint32_t>> p(num_nodes());
        for (const auto& [s, d] : edges) p[d].push_back(s);
        for (auto& v : p) std::sort(v.begin(), v.end());
        return p;
    }

    std::vector<std::vector<std::uint32_t>> children() const {
        std::vector<std::vector<std::uint32_t>> c(num_nodes());
        for (const auto& [s, d] : edges) c[s].push_back(d);
        for (auto& v : c) std::sort(v.begin(), v.end());
        return c;
    }
};

// Kahn's algorithm; ties between incomparable nodes broken by ascending node
// id. Throws naming an edge on a cycle if none exists.
inline std::vector<std::uint32_t> topological_order(const CompGraph& g) {
    const std::size_t m = g.num_nodes();
    std::vector<std::uint32_t> indeg(m, 0);
    for (const auto& [s, d] : g.edges) ++indeg[d];
    auto ch = g.children();
    std::set<std::uint32_t> ready;
    for (std::uint32_t i = 0; i < m; ++i)
        if (indeg[i] == 0) ready.insert(i);
    std::vector<std::uint32_t> order;
    order.reserve(m);
    while (!ready.empty()) {
        std::uint32_t n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        for (std::uint32_t c : ch[n])
            if (--indeg[c] == 0) ready.insert(c);
    }
    if (order.size() != m) {
        // name one edge on a cycle: any edge whose endpoints both kept indeg > 0
        for (const auto& [s, d] : g.edges) {
            if (indeg[d] > 0 &&
                std::find(order.begin(), order.end(), s) == order.end()) {
                throw DataError("graph contains a cycle through edge (" +
                                std::to_string(s) + "," + std::to_string(d) + ")");
            }
        }
        throw DataError("graph contains a cycle");
    }
    return order;
}

// entry(j,i) = 1 iff edge j->i. Column i lists the parents of node i.
inline DenseMatrix adjacency(const CompGraph& g) {
    DenseMatrix a(g.num_nodes(), g.num_nodes(), 0.0);
    for (const auto& [s, d] : g.edges) a(s, d) = 1.0;
    return a;
}

inline DenseMatrix one_hot_features(const CompGraph& g, const OperatorVocab& v) {
    DenseMatrix f(g.num_nodes(), v.size(), 0.0);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        if (g.node_ops[i] >= v.size())
            throw DataError("node op index outside vocabulary");
        f(i, g.node_ops[i]) = 1.0;
    }
    return f;
}

// One record per line, JSON object with a fixed field order.
struct ParseStats {
    std::size_t unknown_ops = 0;
    std::size_t dropped_nodes = 0;
};

inline CompGraph parse_record(const std::string& line, OperatorVocab& vocab,
                              ParseStats* stats = nullptr,
                              const std::set<std::string>* stoplist = nullptr,
                              bool extend_vocab = false) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed record at byte " + std::to_string(e.byte) +
                        ": " + e.what());
    }
    if (!j.is_object() || !j.contains("ops") || !j.contains("edges"))
        throw DataError("record missing required fields 'ops'/'edges'");

    CompGraph g;
    g.meta.model_name = j.value("model_name", "");
    g.meta.repo_name = j.value("repo_name", "");
    g.meta.task_name = j.value("task_name", "");
    g.meta.flops = j.value("flops", std::uint64_t{0});
    g.meta.params = j.value("params", std::uint64_t{0});
    if (j.contains("label") && !j["label"].is_null())
        g.label = j["label"].get<int>();

    std::vector<std::string> names;
    for (const auto& op : j["ops"]) {
        if (!op.is_string()) throw DataError("op entry is not a string");
        names.push_back(op.get<std::string>());
    }
    for (const auto& n : names) {
        std::size_t idx;
        if (auto found = vocab.find(n)) {
            idx = *found;
        } else if (extend_vocab) {
            idx = vocab.add(n);
        } else {
            idx = OperatorVocab::kUnkIndex;
            if (stats) ++stats->unknown_ops;
        }
        g.node_ops.push_back(static_cast<std::uint32_t>(idx));
    }
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2)
            throw DataError("edge entry is not a [src,dst] pair");
        g.edges.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
    }
    g.validate();

    if (stoplist && !stoplist->empty()) {
        // remove stoplisted nodes, bypassing them (parent -> child)
        std::vector<bool> drop(g.num_nodes(), false);
        bool any = false;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (stoplist->count(names[i])) {
                drop[i] = true;
                any = true;
            }
        }
        if (any) {
            // splice repeatedly until no dropped node remains on a path
            std::set<Edge> es(g.edges.begin(), g.edges.end());
            for (std::uint32_t v = 0; v < g.num_nodes(); ++v) {
                if (!drop[v]) continue;
                std::vector<std::uint32_t> ps, cs;
                for (const auto& [s, d] : es) {
                    if (d == v) ps.push_back(s);
                    if (s == v) cs.push_back(d);
                }
                for (auto it = es.begin(); it != es.end();) {
                    if (it->first == v || it->second == v)
                        it = es.erase(it);
                    else
                        ++it;
                }
                for (auto p : ps)
                    for (auto c : cs)
                        if (p != c) es.insert({p, c});
            }
            std::vector<std::uint32_t> remap(g.num_nodes(), UINT32_MAX);
            CompGraph h;
            h.meta = g.meta;
            h.label = g.label;
            for (std::uint32_t i = 0; i < g.num_nodes(); ++i) {
                if (drop[i]) {
                    if (stats) ++stats->dropped_nodes;
                    continue;
                }
                remap[i] = static_cast<std::uint32_t>(h.node_ops.size());
                h.node_ops.push_back(g.node_ops[i]);
            }
            for (const auto& [s, d] : es)
                if (remap[s] != UINT32_MAX && remap[d] != UINT32_MAX)
                    h.edges.emplace_back(remap[s], remap[d]);
            std::sort(h.edges.begin(), h.edges.end());
            h.validate();
            g = std::move(h);
        }
    }
    topological_order(g);  // reject cyclic records up front
    return g;
}

inline std::string serialize_record(const CompGraph& g, const OperatorVocab& vocab) {
    nlohmann::ordered_json j;
    j["model_name"] = g.meta.model_name;
    j["repo_name"] = g.meta.repo_name;
    j["task_name"] = g.meta.task_name;
    nlohmann::ordered_json ops = nlohmann::ordered_json::array();
    for (auto idx : g.node_ops) ops.push_back(vocab.name(idx));
    j["ops"] = std::move(ops);
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [s, d] : g.edges) edges.push_back({s, d});
    j["edges"] = std::move(edges);
    j["flops"] = g.meta.flops;
    j["params"] = g.meta.params;
    if (g.label) j["label"] = *g.label;
    return j.dump();
}

struct Corpus {
    std::vector<CompGraph> graphs;
    ParseStats stats;
};

inline Corpus load_corpus(const std::string& path, OperatorVocab& vocab,
                          const std::set<std::string>* stoplist = nullptr,
                          bool extend_vocab = false) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    Corpus c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            c.graphs.push_back(
                parse_record(line, vocab, &c.stats, stoplist, extend_vocab));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

inline void save_corpus(const std::string& path, const std::vector<CompGraph>& graphs,
                        const OperatorVocab& vocab) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const auto& g : graphs) out << serialize_record(g, vocab) << "\n";
}

}  // namespace narx
