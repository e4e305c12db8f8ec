#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narx/graph.hpp"
#include "narx/rng.hpp"

namespace narx {

inline const std::vector<std::string>& cell_op_names() {
    static const std::vector<std::string> ops = {
        "skip_connect",  "max_pool_3x3", "avg_pool_3x3", "sep_conv_3x3",
        "sep_conv_5x5",  "dil_conv_3x3", "dil_conv_5x5"};
    return ops;
}

inline OperatorVocab nas_vocab() {
    std::vector<std::string> names = {"stem_conv", "add", "concat",
                                      "global_avg_pool", "fc"};
    for (const auto& o : cell_op_names()) names.push_back(o);
    return OperatorVocab(names);
}

// One connection of an ADD node: source is -2 (cell input c_{k-2}), -1 (cell
// input c_{k-1}) or an earlier ADD index; op indexes cell_op_names().
struct CellConnection {
    int source = -2;
    std::uint8_t op = 0;

    auto operator<=>(const CellConnection&) const = default;
};

// DARTS-style cell genotype: 4 ADD nodes with exactly 2 connections each.
// Connections are kept sorted within each ADD node so two genotypes compare
// slot-by-slot.
struct CellSpec {
    std::array<std::array<CellConnection, 2>, 4> adds;

    void canonicalize() {
        for (auto& pair : adds)
            if (pair[1] < pair[0]) std::swap(pair[0], pair[1]);
    }

    bool operator==(const CellSpec&) const = default;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& pair : adds) {
            nlohmann::json p = nlohmann::json::array();
            for (const auto& c : pair)
                p.push_back({{"source", c.source}, {"op", c.op}});
            j.push_back(std::move(p));
        }
        return j;
    }

    static CellSpec from_json(const nlohmann::json& j) {
        CellSpec s;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t k = 0; k < 2; ++k) {
                s.adds[i][k].source = j.at(i).at(k).at("source").get<int>();
                s.adds[i][k].op = j.at(i).at(k).at("op").get<std::uint8_t>();
            }
        s.canonicalize();
        return s;
    }
};

// Legal sources for ADD^(i): the two cell inputs plus all earlier ADDs.
inline std::vector<int> legal_sources(std::size_t add_index) {
    std::vector<int> s = {-2, -1};
    for (int j = 0; j < static_cast<int>(add_index); ++j) s.push_back(j);
    return s;
}

inline CellSpec sample_cell(Rng& rng) {
    CellSpec spec;
    for (std::size_t i = 0; i < 4; ++i) {
        auto sources = legal_sources(i);
        std::size_t a = rng.next_below(sources.size());
        std::size_t b = rng.next_below(sources.size() - 1);
        if (b >= a) ++b;  // two distinct sources
        spec.adds[i][0] = {sources[a],
                           static_cast<std::uint8_t>(rng.next_below(7))};
        spec.adds[i][1] = {sources[b],
                           static_cast<std::uint8_t>(rng.next_below(7))};
    }
    spec.canonicalize();
    return spec;
}

// Build the full computational graph: stem conv, `num_cells` stacked cells
// (8 op nodes, 4 ADD nodes, 1 concat each), then global average pooling and
// a fully connected tail. Node count = 13 * num_cells + 3.
inline CompGraph cell_to_graph(const CellSpec& spec, std::size_t num_cells,
                               const OperatorVocab& vocab) {
    if (num_cells < 1) throw ConfigError("num_cells must be >= 1");
    auto op_idx = [&vocab](const std::string& name) {
        auto f = vocab.find(name);
        if (!f) throw DataError("vocabulary is missing operator: " + name);
        return static_cast<std::uint32_t>(*f);
    };
    CompGraph g;
    auto add_node = [&g](std::uint32_t op) {
        g.node_ops.push_back(op);
        return static_cast<std::uint32_t>(g.node_ops.size() - 1);
    };
    const std::uint32_t stem = add_node(op_idx("stem_conv"));
    std::uint32_t prev1 = stem;  // c_{k-1}
    std::uint32_t prev2 = stem;  // c_{k-2}
    for (std::size_t k = 0; k < num_cells; ++k) {
        std::array<std::uint32_t, 4> add_ids{};
        for (std::size_t i = 0; i < 4; ++i) {
            std::array<std::uint32_t, 2> op_ids{};
            for (std::size_t c = 0; c < 2; ++c) {
                const auto& conn = spec.adds[i][c];
                op_ids[c] = add_node(op_idx(cell_op_names()[conn.op]));
                std::uint32_t src;
                if (conn.source == -2)
                    src = prev2;
                else if (conn.source == -1)
                    src = prev1;
                else
                    src = add_ids[static_cast<std::size_t>(conn.source)];
                g.edges.emplace_back(src, op_ids[c]);
            }
            add_ids[i] = add_node(op_idx("add"));
            g.edges.emplace_back(op_ids[0], add_ids[i]);
            g.edges.emplace_back(op_ids[1], add_ids[i]);
        }
        const std::uint32_t concat = add_node(op_idx("concat"));
        for (auto a : add_ids) g.edges.emplace_back(a, concat);
        prev2 = prev1;
        prev1 = concat;
    }
    const std::uint32_t pool = add_node(op_idx("global_avg_pool"));
    g.edges.emplace_back(prev1, pool);
    const std::uint32_t fc = add_node(op_idx("fc"));
    g.edges.emplace_back(pool, fc);
    g.validate();
    return g;
}

// Slot-wise edit distance over the canonical genotype: 8 (source, op) slots,
// count the differing ones. A metric on canonical forms.
inline std::size_t genotype_distance(const CellSpec& a, const CellSpec& b) {
    CellSpec ca = a, cb = b;
    ca.canonicalize();
    cb.canonicalize();
    std::size_t d = 0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            if (ca.adds[i][c] != cb.adds[i][c]) ++d;
    return d;
}

// In-place random edit of one connection slot (source or op), keeping the
// two sources of an ADD node distinct.
inline void mutate_slot(CellSpec& spec, Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::size_t i = rng.next_below(4);
        std::size_t c = rng.next_below(2);
        CellConnection& conn = spec.adds[i][c];
        const CellConnection other = spec.adds[i][1 - c];
        if (rng.next_below(2) == 0) {
            std::uint8_t op = static_cast<std::uint8_t>(rng.next_below(6));
            if (op >= conn.op) ++op;
            conn.op = op;
        } else {
            auto sources = legal_sources(i);
            std::vector<int> options;
            for (int s : sources)
                if (s != conn.source && s != other.source) options.push_back(s);
            if (options.empty()) continue;
            conn.source = options[rng.next_below(options.size())];
        }
        spec.canonicalize();
        return;
    }
    throw NumericError("mutate_slot: no legal edit found");
}

struct NasDatasetConfig {
    std::size_t n = 1000;
    std::size_t num_classes = 10;
    std::size_t max_radius = 2;
    std::size_t center_separation = 6;
    std::size_t num_cells = 3;
    std::uint64_t seed = 0;
};

struct NasDataset {
    std::vector<CompGraph> graphs;
    std::vector<CellSpec> centers;
    NasDatasetConfig config;
};

// Class centers are rejection-sampled to pairwise distance >= separation;
// members perturb their center by <= max_radius slot edits and are verified
// (and re-drawn) to be arg-min consistent with their generating center.
inline NasDataset generate_dataset(const NasDatasetConfig& cfg,
                                   const OperatorVocab& vocab) {
    if (cfg.num_classes < 2)
        throw ConfigError("dataset needs >= 2 classes for contrastive training");
    NasDataset ds;
    ds.config = cfg;
    Rng rng(cfg.seed);

    const std::size_t kMaxTries = 20000;
    std::size_t tries = 0;
    while (ds.centers.size() < cfg.num_classes) {
        if (++tries > kMaxTries)
            throw NumericError(
                "could not place " + std::to_string(cfg.num_classes) +
                " class centers at separation " +
                std::to_string(cfg.center_separation) +
                "; try fewer classes or a smaller separation");
        CellSpec cand = sample_cell(rng);
        bool ok = true;
        for (const auto& c : ds.centers)
            if (genotype_distance(cand, c) < cfg.center_separation) ok = false;
        if (ok) ds.centers.push_back(cand);
    }

    auto argmin_class = [&ds](const CellSpec& s, std::size_t& best,
                              bool& unique) {
        std::size_t best_d = SIZE_MAX;
        best = 0;
        unique = true;
        for (std::size_t c = 0; c < ds.centers.size(); ++c) {
            std::size_t d = genotype_distance(s, ds.centers[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
                unique = true;
            } else if (d == best_d) {
                unique = false;
            }
        }
    };

    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t cls = i % cfg.num_classes;
        CellSpec spec;
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt > kMaxTries)
                throw NumericError("could not draw an arg-min consistent member");
            spec = ds.centers[cls];
            std::size_t edits = cfg.max_radius == 0
                                    ? 0
                                    : rng.next_below(cfg.max_radius + 1);
            for (std::size_t e = 0; e < edits; ++e) mutate_slot(spec, rng);
            std::size_t best;
            bool unique;
            argmin_class(spec, best, unique);
            if (best == cls && unique) break;
        }
        CompGraph g = cell_to_graph(spec, cfg.num_cells, vocab);
        g.label = static_cast<int>(cls);
        g.meta.model_name = "nas_" + std::to_string(i);
        g.meta.repo_name = "nas-gen";
        g.meta.task_name = "image-classification";
        g.meta.params = g.num_nodes();
        g.meta.flops = g.edges.size();
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

inline nlohmann::json dataset_manifest(const NasDataset& ds) {
    nlohmann::json j;
    j["seed"] = ds.config.seed;
    j["n"] = ds.config.n;
    j["num_classes"] = ds.config.num_classes;
    j["max_radius"] = ds.config.max_radius;
    j["center_separation"] = ds.config.center_separation;
    j["num_cells"] = ds.config.num_cells;
    j["centers"] = nlohmann::json::array();
    for (const auto& c : ds.centers) j["centers"].push_back(c.to_json());
    return j;
}

}  // namespace narx
