#pragma once

#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narx/gcn.hpp"
#include "narx/macro_graph.hpp"
#include "narx/motif.hpp"

namespace narx {

struct StageConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 256;
    std::size_t layers = 3;
    double learning_rate = 1e-2;
    std::size_t embed_dim = 64;
    double dropout = 0.0;
    double temperature = 1.0;
    std::size_t negatives_per_anchor = 15;
    std::size_t positives_per_anchor = 4;  // stage 2 only
    // Stage-2 contrastive grouping granularity: positives share the same
    // label / group_divisor bucket (model family), while the classifier head
    // always predicts the fine label. 1 = group by the fine label itself.
    std::size_t group_divisor = 1;
    // Multi-task weight on the stage-2 contrastive term: the combined loss is
    // ce + cl_weight * cl. (With Adam, scaling a lone loss term is a no-op,
    // so CL-only training is insensitive to this weight.)
    double cl_weight = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1 || batch_size < 1 || layers < 1 || embed_dim < 1)
            throw ConfigError("stage config: counts must be positive");
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");
        if (group_divisor < 1)
            throw ConfigError("group divisor must be >= 1");
        if (cl_weight <= 0.0)
            throw ConfigError("contrastive weight must be > 0");
    }

    // Motifs CL recipe (desk-scale embedding width).
    static StageConfig stage1_default() {
        StageConfig c;
        c.epochs = 5;
        c.batch_size = 256;
        c.layers = 3;
        c.learning_rate = 1e-2;
        c.embed_dim = 64;
        c.dropout = 0.0;
        c.temperature = 0.1;  // sharper logits at desk scale
        return c;
    }

    // Graph CL recipe.
    static StageConfig stage2_default() {
        StageConfig c;
        c.epochs = 15;
        c.batch_size = 512;
        c.layers = 3;
        c.learning_rate = 1e-3;
        c.embed_dim = 64;
        c.dropout = 0.1;
        c.negatives_per_anchor = 16;
        c.positives_per_anchor = 4;
        c.temperature = 0.2;  // sharper logits at desk scale
        return c;
    }
};

struct MiningSetup {
    EncodeConfig encode;
    MiningConfig mining;
    std::uint32_t context_hop = 1;
    SplitStrategy strategy = SplitStrategy::Ours;
    SplitParams split_params;
    std::uint64_t split_seed = 0;  // drives the random baseline splitter
};

enum class LossMode { CeOnly, ClOnly, CeAndCl };

inline LossMode parse_loss_mode(const std::string& s) {
    if (s == "ce") return LossMode::CeOnly;
    if (s == "cl") return LossMode::ClOnly;
    if (s == "ce+cl") return LossMode::CeAndCl;
    throw ConfigError("unknown loss mode: " + s + " (want ce|cl|ce+cl)");
}

// Per-graph mining artifacts plus the dense inputs the encoders consume.
struct PreparedGraph {
    std::vector<MotifOccurrence> occurrences;
    std::vector<DenseMatrix> occ_feats, occ_adj;  // motif subgraphs
    std::vector<DenseMatrix> ctx_feats, ctx_adj;  // context graphs
};

struct PreparedCorpus {
    LabelTable table;
    std::vector<EncodedSequence> sequences;
    std::vector<MotifPattern> patterns;  // empty for baseline splitters
    std::vector<PreparedGraph> graphs;
};

inline std::vector<MotifOccurrence> occurrences_for_graph(
    const CompGraph& g, const EncodedSequence& seq,
    const std::vector<MotifPattern>& patterns, const MiningSetup& setup,
    std::size_t graph_id) {
    if (setup.strategy == SplitStrategy::Ours)
        return extract_occurrences(g, seq, patterns, setup.encode.steps, graph_id);
    Rng rng = Rng(setup.split_seed).fork(graph_id);
    return split_baseline(g, seq, setup.strategy, setup.split_params,
                          setup.encode.steps, rng, graph_id);
}

inline PreparedCorpus prepare_corpus(const std::vector<CompGraph>& graphs,
                                     const OperatorVocab& vocab,
                                     const MiningSetup& setup) {
    PreparedCorpus pc;
    pc.sequences.reserve(graphs.size());
    for (const auto& g : graphs)
        pc.sequences.push_back(encode(g, setup.encode, pc.table));
    if (setup.strategy == SplitStrategy::Ours)
        pc.patterns = mine_motifs(pc.sequences, pc.table, setup.mining);
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        PreparedGraph pg;
        pg.occurrences = occurrences_for_graph(graphs[gi], pc.sequences[gi],
                                               pc.patterns, setup, gi);
        for (const auto& occ : pg.occurrences) {
            pg.occ_feats.push_back(one_hot_features(occ.subgraph, vocab));
            pg.occ_adj.push_back(normalize_adjacency(adjacency(occ.subgraph)));
            auto ctx = context_graph(graphs[gi], occ, setup.context_hop);
            pg.ctx_feats.push_back(one_hot_features(ctx.subgraph, vocab));
            pg.ctx_adj.push_back(normalize_adjacency(adjacency(ctx.subgraph)));
        }
        pc.graphs.push_back(std::move(pg));
    }
    return pc;
}

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double mean_cl = 0.0;
    double mean_ce = 0.0;
    double wall_seconds = 0.0;
};

inline void write_training_log(const std::vector<EpochStats>& stats,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log: " + path);
    out << "epoch,loss,loss_cl,loss_ce,wall_seconds\n";
    out.precision(17);
    for (const auto& s : stats)
        out << s.epoch << "," << s.mean_loss << "," << s.mean_cl << ","
            << s.mean_ce << "," << s.wall_seconds << "\n";
}

struct Stage1Result {
    GcnParams f_s;
    GcnParams f_c;  // training-only context encoder
    std::vector<EpochStats> curve;
    std::size_t skipped_single_motif = 0;
};

// Motifs-level contrastive pre-training: each motif's context graph is its
// positive, the other motifs of the same graph supply negatives.
inline Stage1Result stage1_train(const PreparedCorpus& corpus,
                                 const OperatorVocab& vocab,
                                 const StageConfig& cfg,
                                 std::optional<GcnParams> init_f_s = std::nullopt) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x517A6E31ull);
    Stage1Result out;
    out.f_s = init_f_s ? std::move(*init_f_s)
                       : GcnParams::init(vocab.size(), cfg.embed_dim,
                                         cfg.embed_dim, cfg.layers, cfg.dropout,
                                         rng);
    out.f_c = GcnParams::init(vocab.size(), cfg.embed_dim, cfg.embed_dim,
                              cfg.layers, cfg.dropout, rng);

    struct Anchor {
        std::size_t graph, occ;
    };
    std::vector<Anchor> anchors;
    for (std::size_t gi = 0; gi < corpus.graphs.size(); ++gi) {
        const auto& pg = corpus.graphs[gi];
        if (pg.occurrences.size() < 2) {
            ++out.skipped_single_motif;
            continue;
        }
        for (std::size_t oi = 0; oi < pg.occurrences.size(); ++oi)
            anchors.push_back({gi, oi});
    }
    if (anchors.empty())
        throw DataError("stage 1: no trainable anchors (every graph has a "
                        "single motif)");

    // batch_size counts contrastive comparisons; each anchor contributes one
    // positive plus its negatives
    const std::size_t anchors_per_batch = std::max<std::size_t>(
        1, cfg.batch_size / (1 + cfg.negatives_per_anchor));

    Adam opt({cfg.learning_rate});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(anchors);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < anchors.size();
             start += anchors_per_batch) {
            const std::size_t stop =
                std::min(anchors.size(), start + anchors_per_batch);
            std::vector<DenseMatrix> gsum_s, gsum_c;
            double batch_loss = 0.0;
            for (std::size_t ai = start; ai < stop; ++ai) {
                const auto& [gi, oi] = anchors[ai];
                const auto& pg = corpus.graphs[gi];
                // negatives: context graphs of the other motifs in the batch;
                // a tail batch with a single anchor falls back to the graph's
                // own other motifs
                std::vector<Anchor> negs;
                if (stop - start > 1) {
                    std::vector<std::size_t> others;
                    for (std::size_t k = start; k < stop; ++k)
                        if (k != ai) others.push_back(k);
                    if (others.size() > cfg.negatives_per_anchor) {
                        rng.shuffle(others);
                        others.resize(cfg.negatives_per_anchor);
                        std::sort(others.begin(), others.end());
                    }
                    for (auto k : others) negs.push_back(anchors[k]);
                } else {
                    std::vector<std::size_t> others;
                    for (std::size_t k = 0; k < pg.occurrences.size(); ++k)
                        if (k != oi) others.push_back(k);
                    if (others.size() > cfg.negatives_per_anchor) {
                        rng.shuffle(others);
                        others.resize(cfg.negatives_per_anchor);
                        std::sort(others.begin(), others.end());
                    }
                    for (auto k : others) negs.push_back({gi, k});
                }

                ad::Tape tape;
                GcnOnTape net_s(tape, out.f_s);
                GcnOnTape net_c(tape, out.f_c);
                auto [sn, anchor_emb] = net_s.forward(
                    tape, pg.occ_feats[oi], pg.occ_adj[oi], true, &rng);
                auto [pn, pos_emb] = net_c.forward(tape, pg.ctx_feats[oi],
                                                   pg.ctx_adj[oi], true, &rng);
                (void)sn;
                (void)pn;
                ad::Var pos_sim = tape.cosine(anchor_emb, pos_emb);
                std::vector<ad::Var> neg_sims;
                for (const auto& [ngi, noi] : negs) {
                    const auto& npg = corpus.graphs[ngi];
                    auto [nn, neg_emb] = net_c.forward(
                        tape, npg.ctx_feats[noi], npg.ctx_adj[noi], true, &rng);
                    (void)nn;
                    neg_sims.push_back(tape.cosine(anchor_emb, neg_emb));
                }
                ad::Var loss =
                    info_nce_from_sims(tape, pos_sim, neg_sims, cfg.temperature);
                tape.backward(loss);
                batch_loss += tape.scalar_value(loss);

                auto gs = net_s.gradients(tape);
                auto gc = net_c.gradients(tape);
                if (gsum_s.empty()) {
                    gsum_s = std::move(gs);
                    gsum_c = std::move(gc);
                } else {
                    for (std::size_t l = 0; l < gs.size(); ++l)
                        add_inplace(gsum_s[l], gs[l]);
                    for (std::size_t l = 0; l < gc.size(); ++l)
                        add_inplace(gsum_c[l], gc[l]);
                }
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            std::vector<DenseMatrix*> params;
            std::vector<DenseMatrix> grads;
            for (std::size_t l = 0; l < out.f_s.weights.size(); ++l) {
                params.push_back(&out.f_s.weights[l]);
                scale_inplace(gsum_s[l], inv);
                grads.push_back(std::move(gsum_s[l]));
            }
            for (std::size_t l = 0; l < out.f_c.weights.size(); ++l) {
                params.push_back(&out.f_c.weights[l]);
                scale_inplace(gsum_c[l], inv);
                grads.push_back(std::move(gsum_c[l]));
            }
            opt.step(params, grads);
            epoch_loss += batch_loss;
            seen += stop - start;
        }
        auto t1 = std::chrono::steady_clock::now();
        EpochStats es;
        es.epoch = epoch;
        es.mean_loss = epoch_loss / static_cast<double>(seen);
        es.mean_cl = es.mean_loss;
        es.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        out.curve.push_back(es);
    }
    return out;
}

// Embed every motif occurrence with the frozen stage-1 encoder and build the
// macro graphs once.
inline std::vector<MacroGraph> build_macro_graphs(
    const std::vector<CompGraph>& graphs, const PreparedCorpus& corpus,
    const GcnParams& f_s) {
    std::vector<MacroGraph> macros;
    macros.reserve(graphs.size());
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& pg = corpus.graphs[gi];
        std::vector<std::vector<double>> embeds;
        embeds.reserve(pg.occurrences.size());
        for (std::size_t oi = 0; oi < pg.occurrences.size(); ++oi)
            embeds.push_back(gcn_embed(f_s, pg.occ_feats[oi], pg.occ_adj[oi]));
        macros.push_back(build_macro(graphs[gi], pg.occurrences, embeds));
    }
    return macros;
}

struct Stage2Result {
    GcnParams f_m;
    ClassifierHead head;
    std::vector<EpochStats> curve;
    std::size_t skipped_singleton_class = 0;
    std::size_t num_classes = 0;
};

// Graph-level pre-training on the static macro graphs: contrastive term over
// same-class positives / other-class negatives plus macro-graph
// classification.
inline Stage2Result stage2_train(const std::vector<MacroGraph>& macros,
                                 const StageConfig& cfg,
                                 LossMode mode = LossMode::CeAndCl) {
    cfg.validate();
    Rng rng(cfg.seed ^ 0x57A9E2C4ull);
    if (macros.empty()) throw DataError("stage 2: empty corpus");

    int max_label = -1;
    for (const auto& m : macros) {
        if (!m.label) throw DataError("stage 2: every graph needs a class label");
        max_label = std::max(max_label, *m.label);
        if (*m.label < 0) throw DataError("stage 2: negative class label");
    }
    const std::size_t num_classes = static_cast<std::size_t>(max_label) + 1;
    if (num_classes < 2) throw DataError("stage 2: needs >= 2 classes");

    // Contrastive pools are built over (possibly coarser) groups; the head
    // still predicts the fine label.
    const std::size_t num_groups =
        (num_classes + cfg.group_divisor - 1) / cfg.group_divisor;
    std::vector<std::vector<std::size_t>> by_group(num_groups);
    for (std::size_t i = 0; i < macros.size(); ++i)
        by_group[static_cast<std::size_t>(*macros[i].label) /
                 cfg.group_divisor]
            .push_back(i);

    const std::size_t emb = macros[0].node_embeddings.empty()
                                ? cfg.embed_dim
                                : macros[0].node_embeddings[0].size();
    Stage2Result out;
    out.num_classes = num_classes;
    out.f_m = GcnParams::init(emb, cfg.embed_dim, cfg.embed_dim, cfg.layers,
                              cfg.dropout, rng);
    out.head = ClassifierHead::init(cfg.embed_dim, num_classes, rng);

    // static inputs
    std::vector<DenseMatrix> feats, adj;
    feats.reserve(macros.size());
    for (const auto& m : macros) {
        feats.push_back(m.feature_matrix());
        adj.push_back(normalize_adjacency(m.adjacency_matrix()));
    }

    std::vector<std::size_t> order(macros.size());
    std::iota(order.begin(), order.end(), 0);

    // batch_size counts contrastive comparisons per anchor
    const std::size_t anchors_per_batch = std::max<std::size_t>(
        1, cfg.batch_size /
               (cfg.positives_per_anchor + cfg.negatives_per_anchor));

    Adam opt({cfg.learning_rate});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double eloss = 0.0, ecl = 0.0, ece = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += anchors_per_batch) {
            const std::size_t stop =
                std::min(order.size(), start + anchors_per_batch);
            std::vector<DenseMatrix> gsum;
            double bl = 0.0;
            for (std::size_t ai = start; ai < stop; ++ai) {
                const std::size_t gi = order[ai];
                const std::size_t cls =
                    static_cast<std::size_t>(*macros[gi].label);

                ad::Tape tape;
                GcnOnTape net(tape, out.f_m);
                ad::Var wvar = tape.leaf(out.head.weight);
                ad::Var bvar = tape.leaf(out.head.bias);
                auto [hn, h_m] =
                    net.forward(tape, feats[gi], adj[gi], true, &rng);
                (void)hn;

                ad::Var loss;
                double cl_val = 0.0, ce_val = 0.0;
                bool has_cl = false;
                if (mode != LossMode::CeOnly) {
                    // positives: same group, never the anchor itself
                    const std::size_t grp = cls / cfg.group_divisor;
                    std::vector<std::size_t> pos_pool, neg_pool;
                    for (auto j : by_group[grp])
                        if (j != gi) pos_pool.push_back(j);
                    for (std::size_t c = 0; c < num_groups; ++c)
                        if (c != grp)
                            for (auto j : by_group[c]) neg_pool.push_back(j);
                    if (pos_pool.empty() || neg_pool.empty()) {
                        ++out.skipped_singleton_class;
                    } else {
                        rng.shuffle(pos_pool);
                        rng.shuffle(neg_pool);
                        if (pos_pool.size() > cfg.positives_per_anchor)
                            pos_pool.resize(cfg.positives_per_anchor);
                        if (neg_pool.size() > cfg.negatives_per_anchor)
                            neg_pool.resize(cfg.negatives_per_anchor);
                        std::vector<ad::Var> pos_sims, neg_sims;
                        for (auto j : pos_pool) {
                            auto [xn, hj] =
                                net.forward(tape, feats[j], adj[j], true, &rng);
                            (void)xn;
                            pos_sims.push_back(tape.cosine(h_m, hj));
                        }
                        for (auto j : neg_pool) {
                            auto [xn, hj] =
                                net.forward(tape, feats[j], adj[j], true, &rng);
                            (void)xn;
                            neg_sims.push_back(tape.cosine(h_m, hj));
                        }
                        loss = group_nce_from_sims(tape, pos_sims, neg_sims,
                                                   cfg.temperature);
                        cl_val = tape.scalar_value(loss);
                        if (cfg.cl_weight != 1.0)
                            loss = tape.s_scale(loss, cfg.cl_weight);
                        has_cl = true;
                    }
                }
                if (mode != LossMode::ClOnly) {
                    // classify from the unit-normalized embedding so the
                    // pre-text task shapes the same cosine geometry the
                    // retrieval index uses
                    ad::Var logits = tape.add_rowvec(
                        tape.matmul(tape.l2_normalize(h_m), wvar), bvar);
                    ad::Var ce = tape.cross_entropy(logits, cls);
                    ce_val = tape.scalar_value(ce);
                    loss = loss.valid() ? tape.add(loss, ce) : ce;
                }
                if (!loss.valid()) continue;  // CL-only anchor with no pairs
                tape.backward(loss);
                bl += tape.scalar_value(loss);
                ecl += cl_val;
                ece += ce_val;
                (void)has_cl;

                std::vector<DenseMatrix> g = net.gradients(tape);
                g.push_back(tape.gradient(wvar));
                g.push_back(tape.gradient(bvar));
                if (gsum.empty()) {
                    gsum = std::move(g);
                } else {
                    for (std::size_t l = 0; l < g.size(); ++l)
                        add_inplace(gsum[l], g[l]);
                }
            }
            if (gsum.empty()) continue;
            const double inv = 1.0 / static_cast<double>(stop - start);
            std::vector<DenseMatrix*> params;
            for (auto& w : out.f_m.weights) params.push_back(&w);
            params.push_back(&out.head.weight);
            params.push_back(&out.head.bias);
            for (auto& g : gsum) scale_inplace(g, inv);
            opt.step(params, gsum);
            eloss += bl;
            seen += stop - start;
        }
        auto t1 = std::chrono::steady_clock::now();
        EpochStats es;
        es.epoch = epoch;
        es.mean_loss = seen ? eloss / static_cast<double>(seen) : 0.0;
        es.mean_cl = seen ? ecl / static_cast<double>(seen) : 0.0;
        es.mean_ce = seen ? ece / static_cast<double>(seen) : 0.0;
        es.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        out.curve.push_back(es);
    }
    return out;
}

// Inference bundle: motif encoder + macro encoder (+ optional head). The
// context encoder is a training-time object and is never serialized here.
struct TrainedModels {
    GcnParams f_s;
    GcnParams f_m;
    std::optional<ClassifierHead> head;
    MiningSetup mining;
    std::size_t vocab_size = 0;
};

inline nlohmann::json mining_to_json(const MiningSetup& m) {
    nlohmann::json j;
    j["steps"] = m.encode.steps;
    j["include_children"] = m.encode.include_children;
    j["min_len"] = m.mining.min_len;
    j["min_freq"] = m.mining.min_freq;
    j["max_len"] = m.mining.max_len;
    j["per_graph"] = m.mining.per_graph;
    j["context_hop"] = m.context_hop;
    int strat = static_cast<int>(m.strategy);
    j["strategy"] = strat;
    j["nodes_per_motif"] = m.split_params.nodes_per_motif;
    j["motifs_per_graph"] = m.split_params.motifs_per_graph;
    j["random_min"] = m.split_params.random_min;
    j["random_max"] = m.split_params.random_max;
    j["split_seed"] = m.split_seed;
    return j;
}

inline MiningSetup mining_from_json(const nlohmann::json& j) {
    MiningSetup m;
    m.encode.steps = j.at("steps").get<std::uint32_t>();
    m.encode.include_children = j.at("include_children").get<bool>();
    m.mining.min_len = j.at("min_len").get<std::size_t>();
    m.mining.min_freq = j.at("min_freq").get<std::size_t>();
    m.mining.max_len = j.at("max_len").get<std::size_t>();
    m.mining.per_graph = j.at("per_graph").get<bool>();
    m.context_hop = j.at("context_hop").get<std::uint32_t>();
    m.strategy = static_cast<SplitStrategy>(j.at("strategy").get<int>());
    m.split_params.nodes_per_motif = j.at("nodes_per_motif").get<std::size_t>();
    m.split_params.motifs_per_graph = j.at("motifs_per_graph").get<std::size_t>();
    m.split_params.random_min = j.at("random_min").get<std::size_t>();
    m.split_params.random_max = j.at("random_max").get<std::size_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    return m;
}

inline void save_models(const TrainedModels& m, const std::string& path) {
    nlohmann::json j;
    j["format"] = "narx-models";
    j["version"] = 1;
    j["vocab_size"] = m.vocab_size;
    j["mining"] = mining_to_json(m.mining);
    j["f_s"] = gcn_to_json(m.f_s);
    j["f_m"] = gcn_to_json(m.f_m);
    if (m.head) j["head"] = head_to_json(*m.head);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump();
}

inline TrainedModels load_models(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "narx-models")
        throw DataError("not a model checkpoint: " + path);
    TrainedModels m;
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.mining = mining_from_json(j.at("mining"));
    m.f_s = gcn_from_json(j.at("f_s"));
    m.f_m = gcn_from_json(j.at("f_m"));
    if (j.contains("head")) m.head = head_from_json(j.at("head"));
    return m;
}

inline void save_stage1(const Stage1Result& r, std::size_t vocab_size,
                        const std::string& path) {
    nlohmann::json j;
    j["format"] = "narx-stage1";
    j["version"] = 1;
    j["vocab_size"] = vocab_size;
    j["f_s"] = gcn_to_json(r.f_s);
    j["f_c"] = gcn_to_json(r.f_c);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump();
}

inline std::pair<GcnParams, GcnParams> load_stage1(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "narx-stage1")
        throw DataError("not a stage-1 checkpoint: " + path);
    return {gcn_from_json(j.at("f_s")), gcn_from_json(j.at("f_c"))};
}

// Inference: motif sampling -> motif embeddings -> macro aggregation ->
// macro encoding -> mean readout. Deterministic (no dropout).
inline std::vector<double> embed_architecture(
    const CompGraph& g, const TrainedModels& models, const OperatorVocab& vocab,
    const std::vector<MotifPattern>* corpus_patterns = nullptr,
    LabelTable* shared_table = nullptr) {
    LabelTable local_table;
    LabelTable& table = shared_table ? *shared_table : local_table;
    EncodedSequence seq = encode(g, models.mining.encode, table);

    std::vector<MotifOccurrence> occs;
    if (models.mining.strategy == SplitStrategy::Ours) {
        if (corpus_patterns) {
            occs = extract_occurrences(g, seq, *corpus_patterns,
                                       models.mining.encode.steps);
        } else {
            // per-graph mining: repeated subsequences of this graph alone
            auto patterns =
                detail::mine_corpus({&seq.linear_labels}, table, models.mining.mining);
            occs = extract_occurrences(g, seq, patterns,
                                       models.mining.encode.steps);
        }
    } else {
        Rng rng = Rng(models.mining.split_seed).fork(0);
        occs = split_baseline(g, seq, models.mining.strategy,
                              models.mining.split_params,
                              models.mining.encode.steps, rng);
    }

    std::vector<std::vector<double>> embeds;
    embeds.reserve(occs.size());
    for (const auto& occ : occs) {
        DenseMatrix f = one_hot_features(occ.subgraph, vocab);
        DenseMatrix a = normalize_adjacency(adjacency(occ.subgraph));
        embeds.push_back(gcn_embed(models.f_s, f, a));
    }
    MacroGraph macro = build_macro(g, occs, embeds);
    return gcn_embed(models.f_m, macro.feature_matrix(),
                     normalize_adjacency(macro.adjacency_matrix()));
}

}  // namespace narx
