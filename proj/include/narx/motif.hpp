#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "narx/encode.hpp"
#include "narx/graph.hpp"
#include "narx/rng.hpp"

namespace narx {

struct MiningConfig {
    std::size_t min_len = 2;
    std::size_t min_freq = 2;
    std::size_t max_len = 30;
    bool per_graph = false;  // mine patterns per graph instead of corpus-wide
};

struct MotifPattern {
    std::vector<LabelId> label_seq;
    std::size_t frequency = 0;  // non-overlapping occurrence count in corpus
    bool singleton_fallback = false;
    std::string canon_key;  // canonical label strings joined, for stable order

    std::size_t length() const { return label_seq.size(); }
};

struct MotifOccurrence {
    std::size_t graph_id = 0;
    std::size_t pattern_index = npos();
    std::vector<std::uint32_t> core_nodes;      // original node ids
    std::vector<std::uint32_t> expanded_nodes;  // core + order-s in-neighbours
    CompGraph subgraph;                         // induced over expanded_nodes
    std::vector<std::uint32_t> node_map;        // subgraph node -> original id

    static std::size_t npos() { return std::numeric_limits<std::size_t>::max(); }
};

struct ContextGraph {
    CompGraph subgraph;
    std::vector<std::uint32_t> node_map;
    std::uint32_t hop = 1;
};

inline std::pair<CompGraph, std::vector<std::uint32_t>> induced_subgraph(
    const CompGraph& g, std::vector<std::uint32_t> nodes) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    for (std::uint32_t i = 0; i < nodes.size(); ++i) remap[nodes[i]] = i;
    CompGraph sub;
    sub.label = g.label;
    for (auto n : nodes) sub.node_ops.push_back(g.node_ops[n]);
    for (const auto& [s, d] : g.edges) {
        auto si = remap.find(s);
        auto di = remap.find(d);
        if (si != remap.end() && di != remap.end())
            sub.edges.emplace_back(si->second, di->second);
    }
    std::sort(sub.edges.begin(), sub.edges.end());
    return {std::move(sub), std::move(nodes)};
}

namespace detail {

inline std::string pattern_key(const std::vector<LabelId>& seq,
                               const LabelTable& table) {
    std::string k;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) k += '\x1f';
        k += table.canon(seq[i]);
    }
    return k;
}

// Greedy left-to-right non-overlapping match count of `pat` in `seq`.
inline std::size_t count_non_overlapping(const std::vector<LabelId>& seq,
                                         const std::vector<LabelId>& pat) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i + pat.size() <= seq.size()) {
        if (std::equal(pat.begin(), pat.end(), seq.begin() + i)) {
            ++count;
            i += pat.size();
        } else {
            ++i;
        }
    }
    return count;
}

// Orders patterns longest-first, then by canonical key.
inline bool pattern_before(const MotifPattern& a, const MotifPattern& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    return a.canon_key < b.canon_key;
}

// Claim non-overlapping spans of `pat` over uncovered positions,
// left-to-right. Returns claimed start positions.
inline std::vector<std::size_t> claim_spans(const std::vector<LabelId>& seq,
                                            const std::vector<LabelId>& pat,
                                            std::vector<bool>& covered) {
    std::vector<std::size_t> starts;
    std::size_t i = 0;
    while (i + pat.size() <= seq.size()) {
        bool free = true;
        for (std::size_t j = 0; j < pat.size() && free; ++j)
            if (covered[i + j]) free = false;
        if (free && std::equal(pat.begin(), pat.end(), seq.begin() + i)) {
            for (std::size_t j = 0; j < pat.size(); ++j) covered[i + j] = true;
            starts.push_back(i);
            i += pat.size();
        } else {
            ++i;
        }
    }
    return starts;
}

inline std::vector<MotifPattern> mine_corpus(
    const std::vector<const std::vector<LabelId>*>& seqs, const LabelTable& table,
    const MiningConfig& cfg) {
    // enumerate candidate substrings and their raw non-overlapping counts
    struct Cand {
        std::vector<LabelId> seq;
        std::size_t freq = 0;
    };
    std::unordered_map<std::string, Cand> cands;
    for (const auto* sp : seqs) {
        const auto& s = *sp;
        const std::size_t maxl = std::min(cfg.max_len, s.size());
        for (std::size_t len = cfg.min_len; len <= maxl; ++len) {
            for (std::size_t start = 0; start + len <= s.size(); ++start) {
                std::vector<LabelId> sub(s.begin() + start, s.begin() + start + len);
                std::string key = pattern_key(sub, table);
                cands.emplace(std::move(key), Cand{std::move(sub), 0});
            }
        }
    }
    for (auto& [key, c] : cands) {
        for (const auto* sp : seqs) c.freq += count_non_overlapping(*sp, c.seq);
    }

    // keep only maximal qualifying patterns: drop a pattern when extending it
    // by one label (on either side) preserves its frequency
    std::unordered_map<std::string, bool> non_maximal;
    for (const auto& [key, c] : cands) {
        if (c.seq.size() <= cfg.min_len) continue;
        std::vector<LabelId> prefix(c.seq.begin(), c.seq.end() - 1);
        std::vector<LabelId> suffix(c.seq.begin() + 1, c.seq.end());
        for (const auto& inner : {prefix, suffix}) {
            auto it = cands.find(pattern_key(inner, table));
            if (it != cands.end() && it->second.freq == c.freq)
                non_maximal[it->first] = true;
        }
    }
    std::vector<MotifPattern> result;
    for (auto& [key, c] : cands) {
        if (c.freq < cfg.min_freq) continue;
        if (non_maximal.count(key)) continue;
        result.push_back({std::move(c.seq), c.freq, false, key});
    }
    std::sort(result.begin(), result.end(), pattern_before);

    // replay the greedy longest-first claim only to find uncovered positions
    std::vector<std::vector<bool>> covered;
    covered.reserve(seqs.size());
    for (const auto* sp : seqs) covered.emplace_back(sp->size(), false);
    for (const auto& p : result)
        for (std::size_t gi = 0; gi < seqs.size(); ++gi)
            claim_spans(*seqs[gi], p.label_seq, covered[gi]);

    // singleton fallback for every uncovered node label
    std::map<std::string, MotifPattern> singles;
    for (std::size_t gi = 0; gi < seqs.size(); ++gi) {
        const auto& s = *seqs[gi];
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (covered[gi][i]) continue;
            std::string key = table.canon(s[i]);
            auto it = singles.find(key);
            if (it == singles.end())
                singles.emplace(key, MotifPattern{{s[i]}, 1, true, key});
            else
                ++it->second.frequency;
        }
    }
    for (auto& [key, p] : singles) result.push_back(std::move(p));
    return result;
}

}  // namespace detail

// Discover repeated contiguous label subsequences as motifs. Deterministic:
// identical inputs produce identical output order (length desc, then
// canonical key; singleton fallbacks last).
inline std::vector<MotifPattern> mine_motifs(
    const std::vector<EncodedSequence>& seqs, const LabelTable& table,
    const MiningConfig& cfg) {
    if (cfg.min_len < 1) throw ConfigError("min_len must be >= 1");
    if (cfg.min_freq < 2) throw ConfigError("min_freq must be >= 2");
    if (cfg.per_graph) {
        // union of per-graph mining results, deduplicated by key
        std::map<std::string, MotifPattern> merged;
        for (const auto& s : seqs) {
            auto part = detail::mine_corpus({&s.linear_labels}, table, cfg);
            for (auto& p : part) {
                auto it = merged.find(p.canon_key);
                if (it == merged.end())
                    merged.emplace(p.canon_key, std::move(p));
                else
                    it->second.frequency += p.frequency;
            }
        }
        std::vector<MotifPattern> out;
        for (auto& [k, p] : merged) out.push_back(std::move(p));
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            if (a.singleton_fallback != b.singleton_fallback)
                return !a.singleton_fallback;
            return detail::pattern_before(a, b);
        });
        return out;
    }
    std::vector<const std::vector<LabelId>*> ptrs;
    ptrs.reserve(seqs.size());
    for (const auto& s : seqs) ptrs.push_back(&s.linear_labels);
    return detail::mine_corpus(ptrs, table, cfg);
}

// Nodes reachable from `core` through at most `steps` reverse edges.
inline std::vector<std::uint32_t> expand_in_neighbours(
    const CompGraph& g, const std::vector<std::uint32_t>& core,
    std::uint32_t steps) {
    auto parents = g.parents();
    std::vector<bool> in(g.num_nodes(), false);
    std::vector<std::uint32_t> frontier = core;
    for (auto n : core) in[n] = true;
    for (std::uint32_t k = 0; k < steps; ++k) {
        std::vector<std::uint32_t> next;
        for (auto n : frontier) {
            for (auto p : parents[n]) {
                if (!in[p]) {
                    in[p] = true;
                    next.push_back(p);
                }
            }
        }
        frontier = std::move(next);
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < g.num_nodes(); ++i)
        if (in[i]) out.push_back(i);
    return out;
}

inline MotifOccurrence make_occurrence(const CompGraph& g, std::size_t graph_id,
                                       std::size_t pattern_index,
                                       std::vector<std::uint32_t> core,
                                       std::uint32_t steps) {
    MotifOccurrence occ;
    occ.graph_id = graph_id;
    occ.pattern_index = pattern_index;
    std::sort(core.begin(), core.end());
    occ.core_nodes = std::move(core);
    occ.expanded_nodes = expand_in_neighbours(g, occ.core_nodes, steps);
    auto [sub, map] = induced_subgraph(g, occ.expanded_nodes);
    occ.subgraph = std::move(sub);
    occ.node_map = std::move(map);
    return occ;
}

// Partition the graph's nodes into occurrence cores by replaying the greedy
// claim over the linearized label sequence. Labels without a matching pattern
// become occurrences with pattern_index = npos (unseen at inference time).
inline std::vector<MotifOccurrence> extract_occurrences(
    const CompGraph& g, const EncodedSequence& seq,
    const std::vector<MotifPattern>& patterns, std::uint32_t steps,
    std::size_t graph_id = 0) {
    std::vector<bool> covered(seq.linear_labels.size(), false);
    std::vector<MotifOccurrence> occs;
    for (std::size_t pi = 0; pi < patterns.size(); ++pi) {
        const auto& p = patterns[pi];
        if (p.singleton_fallback) continue;
        auto starts = detail::claim_spans(seq.linear_labels, p.label_seq, covered);
        for (auto st : starts) {
            std::vector<std::uint32_t> core(seq.order.begin() + st,
                                            seq.order.begin() + st + p.length());
            occs.push_back(make_occurrence(g, graph_id, pi, std::move(core), steps));
        }
    }
    // remaining positions fall back to singleton occurrences
    std::unordered_map<LabelId, std::size_t> singleton_index;
    for (std::size_t pi = 0; pi < patterns.size(); ++pi)
        if (patterns[pi].singleton_fallback)
            singleton_index.emplace(patterns[pi].label_seq[0], pi);
    for (std::size_t i = 0; i < covered.size(); ++i) {
        if (covered[i]) continue;
        auto it = singleton_index.find(seq.linear_labels[i]);
        std::size_t pi = it == singleton_index.end() ? MotifOccurrence::npos()
                                                     : it->second;
        occs.push_back(make_occurrence(g, graph_id, pi, {seq.order[i]}, steps));
    }
    return occs;
}

// Combined graph of the motif and its undirected k-hop neighbourhood.
inline ContextGraph context_graph(const CompGraph& g, const MotifOccurrence& occ,
                                  std::uint32_t hop) {
    if (hop < 1) throw ConfigError("context hop must be >= 1");
    auto parents = g.parents();
    auto children = g.children();
    std::vector<bool> in(g.num_nodes(), false);
    std::vector<std::uint32_t> frontier = occ.expanded_nodes;
    for (auto n : frontier) in[n] = true;
    for (std::uint32_t k = 0; k < hop; ++k) {
        std::vector<std::uint32_t> next;
        for (auto n : frontier) {
            for (auto nb : parents[n])
                if (!in[nb]) in[nb] = true, next.push_back(nb);
            for (auto nb : children[n])
                if (!in[nb]) in[nb] = true, next.push_back(nb);
        }
        frontier = std::move(next);
    }
    std::vector<std::uint32_t> nodes;
    for (std::uint32_t i = 0; i < g.num_nodes(); ++i)
        if (in[i]) nodes.push_back(i);
    ContextGraph ctx;
    ctx.hop = hop;
    auto [sub, map] = induced_subgraph(g, std::move(nodes));
    ctx.subgraph = std::move(sub);
    ctx.node_map = std::move(map);
    return ctx;
}

// Baseline subgraph splitters for the comparison harness: fixed nodes per
// motif, fixed motifs per graph, or random sizes within a range.
enum class SplitStrategy { Ours, NodeNum, MotifNum, Random };

inline SplitStrategy parse_split_strategy(const std::string& s) {
    if (s == "ours") return SplitStrategy::Ours;
    if (s == "node-num") return SplitStrategy::NodeNum;
    if (s == "motif-num") return SplitStrategy::MotifNum;
    if (s == "random") return SplitStrategy::Random;
    throw ConfigError("unknown split strategy: " + s);
}

struct SplitParams {
    std::size_t nodes_per_motif = 4;
    std::size_t motifs_per_graph = 8;
    std::size_t random_min = 2;
    std::size_t random_max = 8;
};

inline std::vector<MotifOccurrence> split_baseline(
    const CompGraph& g, const EncodedSequence& seq, SplitStrategy strategy,
    const SplitParams& params, std::uint32_t steps, Rng& rng,
    std::size_t graph_id = 0) {
    const std::size_t m = seq.order.size();
    std::vector<std::size_t> sizes;
    switch (strategy) {
        case SplitStrategy::NodeNum: {
            std::size_t chunk = std::max<std::size_t>(1, params.nodes_per_motif);
            for (std::size_t done = 0; done < m; done += chunk)
                sizes.push_back(std::min(chunk, m - done));
            break;
        }
        case SplitStrategy::MotifNum: {
            std::size_t k = std::max<std::size_t>(1, params.motifs_per_graph);
            k = std::min(k, m);
            std::size_t base = m / k, extra = m % k;
            for (std::size_t i = 0; i < k; ++i)
                sizes.push_back(base + (i < extra ? 1 : 0));
            break;
        }
        case SplitStrategy::Random: {
            std::size_t lo = std::max<std::size_t>(1, params.random_min);
            std::size_t hi = std::max(lo, params.random_max);
            std::size_t done = 0;
            while (done < m) {
                std::size_t s = lo + rng.next_below(hi - lo + 1);
                s = std::min(s, m - done);
                sizes.push_back(s);
                done += s;
            }
            break;
        }
        case SplitStrategy::Ours:
            throw ConfigError("split_baseline does not handle the mined strategy");
    }
    std::vector<MotifOccurrence> occs;
    std::size_t pos = 0;
    for (auto s : sizes) {
        std::vector<std::uint32_t> core(seq.order.begin() + pos,
                                        seq.order.begin() + pos + s);
        occs.push_back(make_occurrence(g, graph_id, MotifOccurrence::npos(),
                                       std::move(core), steps));
        pos += s;
    }
    return occs;
}

}  // namespace narx
