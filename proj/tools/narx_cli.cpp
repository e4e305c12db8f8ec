// Command-line front end: dataset generation, motif mining, two-stage
// training, embedding, indexing, retrieval and evaluation.

#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "narx/nas_gen.hpp"
#include "narx/pipeline.hpp"
#include "narx/retrieval.hpp"

using namespace narx;

namespace {

// Values from the --config JSON file are applied to every option the user did
// not pass explicitly. Flags win over the file.
void apply_config(CLI::App& app, const std::string& config_path) {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file is not valid JSON: " +
                          std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config file must be a JSON object");
    for (auto& [key, value] : j.items()) {
        CLI::Option* opt = app.get_option_no_throw("--" + key);
        if (!opt) throw ConfigError("config file sets unknown option: " + key);
        if (opt->count() > 0) continue;  // explicit flag wins
        std::string s = value.is_string() ? value.get<std::string>()
                                          : value.dump();
        opt->add_result(s);
        opt->run_callback();
    }
}

// NARX_SEED overrides a config-file seed; an explicit --seed flag wins.
void apply_seed_env(CLI::App& app, std::uint64_t& seed) {
    const char* env = std::getenv("NARX_SEED");
    if (!env) return;
    CLI::Option* opt = app.get_option_no_throw("--seed");
    if (opt && opt->count() > 0) return;
    try {
        seed = std::stoull(env);
    } catch (...) {
        throw ConfigError("NARX_SEED is not an unsigned integer: " +
                          std::string(env));
    }
}

std::vector<std::size_t> parse_cutoffs(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoull(tok));
        } catch (...) {
            throw ConfigError("bad cutoff value: " + tok);
        }
        if (out.back() == 0) throw ConfigError("cutoffs must be >= 1");
    }
    if (out.empty()) throw ConfigError("no cutoffs given");
    return out;
}

std::set<std::string> load_stoplist(const std::string& path) {
    std::set<std::string> stop;
    if (path.empty()) return stop;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stoplist file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) stop.insert(line);
    }
    return stop;
}

EmbeddingIndex index_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings csv: " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("id,label", 0) != 0)
        throw DataError("embeddings csv must start with 'id,label,...'");
    EmbeddingIndex idx;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, tok;
        if (!std::getline(ss, id, ','))
            throw DataError(path + ":" + std::to_string(lineno) + ": bad row");
        if (!std::getline(ss, tok, ','))
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": missing label");
        int label = std::stoi(tok);
        std::vector<double> vec;
        while (std::getline(ss, tok, ',')) vec.push_back(std::stod(tok));
        idx.add(std::move(id), label, std::move(vec));
    }
    return idx;
}

struct MiningFlags {
    std::uint32_t steps = 2;
    bool children = false;
    std::size_t min_len = 2, min_freq = 2, max_len = 30;
    bool per_graph = false;
    std::uint32_t hop = 1;
    std::string split = "ours";
    SplitParams split_params;

    void attach(CLI::App* cmd) {
        cmd->add_option("--steps", steps, "encoding refinement steps");
        cmd->add_flag("--children", children,
                      "include child labels in the encoding");
        cmd->add_option("--min-len", min_len, "minimum motif length");
        cmd->add_option("--min-freq", min_freq, "minimum motif frequency");
        cmd->add_option("--max-len", max_len, "maximum motif length");
        cmd->add_flag("--per-graph", per_graph,
                      "mine per graph instead of corpus-wide");
        cmd->add_option("--hop", hop, "context neighbourhood hops");
        cmd->add_option("--split", split,
                        "subgraph splitter: ours|node-num|motif-num|random");
        cmd->add_option("--split-nodes", split_params.nodes_per_motif,
                        "node-num splitter: nodes per motif");
        cmd->add_option("--split-motifs", split_params.motifs_per_graph,
                        "motif-num splitter: motifs per graph");
        cmd->add_option("--split-min", split_params.random_min,
                        "random splitter: minimum chunk");
        cmd->add_option("--split-max", split_params.random_max,
                        "random splitter: maximum chunk");
    }

    MiningSetup to_setup(std::uint64_t seed) const {
        MiningSetup s;
        s.encode.steps = steps;
        s.encode.include_children = children;
        s.mining.min_len = min_len;
        s.mining.min_freq = min_freq;
        s.mining.max_len = max_len;
        s.mining.per_graph = per_graph;
        s.context_hop = hop;
        s.strategy = parse_split_strategy(split);
        s.split_params = split_params;
        s.split_seed = seed;
        return s;
    }
};

struct StageFlags {
    std::size_t epochs, batch_size, layers, embed_dim;
    double lr, dropout, temperature;
    std::size_t negatives, positives, group_divisor;
    double cl_weight;

    explicit StageFlags(const StageConfig& d)
        : epochs(d.epochs),
          batch_size(d.batch_size),
          layers(d.layers),
          embed_dim(d.embed_dim),
          lr(d.learning_rate),
          dropout(d.dropout),
          temperature(d.temperature),
          negatives(d.negatives_per_anchor),
          positives(d.positives_per_anchor),
          group_divisor(d.group_divisor),
          cl_weight(d.cl_weight) {}

    void attach(CLI::App* cmd, bool stage2) {
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch-size", batch_size,
                        "contrastive comparisons per batch");
        cmd->add_option("--layers", layers, "GCN layers");
        cmd->add_option("--embed-dim", embed_dim, "embedding width");
        cmd->add_option("--lr", lr, "adam learning rate");
        cmd->add_option("--dropout", dropout, "hidden-layer dropout rate");
        cmd->add_option("--temperature", temperature,
                        "contrastive temperature");
        cmd->add_option("--negatives", negatives, "negatives per anchor");
        if (stage2) {
            cmd->add_option("--positives", positives, "positives per anchor");
            cmd->add_option(
                "--group-divisor", group_divisor,
                "contrastive positives share label/divisor (family) buckets");
            cmd->add_option("--cl-weight", cl_weight,
                            "weight of the contrastive term in ce+cl");
        }
    }

    StageConfig to_config(std::uint64_t seed) const {
        StageConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.layers = layers;
        c.embed_dim = embed_dim;
        c.learning_rate = lr;
        c.dropout = dropout;
        c.temperature = temperature;
        c.negatives_per_anchor = negatives;
        c.positives_per_anchor = positives;
        c.group_divisor = group_divisor;
        c.cl_weight = cl_weight;
        c.seed = seed;
        return c;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"neural architecture motif mining and retrieval"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    app.add_option("--config", config_path,
                   "JSON file with defaults for any option")
        ->expected(1);
    app.add_option("--seed", seed, "random seed (NARX_SEED overrides config)");
    app.add_option("--workers", workers,
                   "worker threads (reserved; execution is sequential)");

    // ---- gen-nas ----
    auto* gen = app.add_subcommand("gen-nas", "generate a labeled cell corpus");
    std::string gen_out, gen_manifest, gen_vocab_out;
    NasDatasetConfig gen_cfg;
    gen->add_option("--out", gen_out, "corpus output (json lines)")->required();
    gen->add_option("--manifest", gen_manifest, "generation manifest (json)");
    gen->add_option("--vocab-out", gen_vocab_out, "write the vocabulary here");
    gen->add_option("--n", gen_cfg.n, "number of architectures");
    gen->add_option("--classes", gen_cfg.num_classes, "number of classes");
    gen->add_option("--cells", gen_cfg.num_cells, "stacked cells per graph");
    gen->add_option("--max-radius", gen_cfg.max_radius,
                    "max slot edits from the class center");
    gen->add_option("--separation", gen_cfg.center_separation,
                    "min pairwise center distance");

    // ---- split ----
    auto* split = app.add_subcommand(
        "split", "stratified train/test split of a labeled corpus");
    std::string split_in, split_vocab, split_train, split_test;
    double split_frac = 0.1;
    split->add_option("--in", split_in, "corpus input")->required();
    split->add_option("--vocab", split_vocab, "vocabulary file")->required();
    split->add_option("--train", split_train, "train output")->required();
    split->add_option("--test", split_test, "test output")->required();
    split->add_option("--test-frac", split_frac, "held-out fraction");

    // ---- mine ----
    auto* mine = app.add_subcommand("mine", "mine motif patterns");
    std::string mine_in, mine_vocab, mine_out, mine_stoplist;
    MiningFlags mine_flags;
    mine->add_option("--in", mine_in, "corpus input")->required();
    mine->add_option("--vocab", mine_vocab, "vocabulary file")->required();
    mine->add_option("--out", mine_out, "pattern report (json)")->required();
    mine->add_option("--stoplist", mine_stoplist,
                     "drop these ops while parsing");
    mine_flags.attach(mine);

    // ---- train-motifs ----
    auto* tm = app.add_subcommand("train-motifs",
                                  "stage 1: motif-level contrastive training");
    std::string tm_in, tm_vocab, tm_out, tm_log, tm_stoplist;
    MiningFlags tm_mining;
    StageFlags tm_stage(StageConfig::stage1_default());
    tm->add_option("--in", tm_in, "corpus input")->required();
    tm->add_option("--vocab", tm_vocab, "vocabulary file")->required();
    tm->add_option("--out", tm_out, "stage-1 checkpoint (json)")->required();
    tm->add_option("--log", tm_log, "epoch metrics csv");
    tm->add_option("--stoplist", tm_stoplist, "drop these ops while parsing");
    tm_mining.attach(tm);
    tm_stage.attach(tm, false);

    // ---- train-graph ----
    auto* tg = app.add_subcommand("train-graph",
                                  "stage 2: graph-level training");
    std::string tg_in, tg_vocab, tg_stage1, tg_out, tg_log, tg_loss = "ce+cl";
    std::string tg_stoplist;
    MiningFlags tg_mining;
    StageFlags tg_stage(StageConfig::stage2_default());
    tg->add_option("--in", tg_in, "labeled corpus input")->required();
    tg->add_option("--vocab", tg_vocab, "vocabulary file")->required();
    tg->add_option("--stage1", tg_stage1, "stage-1 checkpoint")->required();
    tg->add_option("--out", tg_out, "model bundle output (json)")->required();
    tg->add_option("--log", tg_log, "epoch metrics csv");
    tg->add_option("--loss", tg_loss, "loss terms: ce|cl|ce+cl");
    tg->add_option("--stoplist", tg_stoplist, "drop these ops while parsing");
    tg_mining.attach(tg);
    tg_stage.attach(tg, true);

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "embed a corpus with a bundle");
    std::string em_in, em_vocab, em_models, em_out, em_stoplist;
    bool em_per_graph = false;
    embed->add_option("--in", em_in, "corpus input")->required();
    embed->add_option("--vocab", em_vocab, "vocabulary file")->required();
    embed->add_option("--models", em_models, "model bundle")->required();
    embed->add_option("--out", em_out, "embeddings csv")->required();
    embed->add_option("--stoplist", em_stoplist,
                      "drop these ops while parsing");
    embed->add_flag("--per-graph-patterns", em_per_graph,
                    "mine patterns per graph instead of over this corpus");

    // ---- index ----
    auto* index = app.add_subcommand("index",
                                     "build a binary index from embeddings");
    std::string ix_in, ix_out;
    index->add_option("--in", ix_in, "embeddings csv")->required();
    index->add_option("--out", ix_out, "index output (binary)")->required();

    // ---- query ----
    auto* q = app.add_subcommand("query", "top-k neighbours of an indexed id");
    std::string q_index, q_id, q_out;
    std::size_t q_k = 10;
    bool q_include_self = false;
    q->add_option("--index", q_index, "index file")->required();
    q->add_option("--id", q_id, "query id (must be in the index)")->required();
    q->add_option("-k,--topk", q_k, "results to return");
    q->add_option("--out", q_out, "write csv here instead of stdout");
    q->add_flag("--include-self", q_include_self,
                "keep the query itself in the results");

    // ---- eval ----
    auto* ev = app.add_subcommand(
        "eval", "rank every indexed item against the rest and score it");
    std::string ev_index, ev_out, ev_cutoffs = "20,50,100";
    bool ev_include_self = false;
    ev->add_option("--index", ev_index, "index file")->required();
    ev->add_option("--out", ev_out, "metrics csv")->required();
    ev->add_option("--cutoffs", ev_cutoffs, "comma-separated cutoffs");
    ev->add_flag("--include-self", ev_include_self,
                 "keep each query in its own results");

    // ---- export ----
    auto* ex = app.add_subcommand("export", "dump an index back to csv");
    std::string ex_index, ex_out;
    ex->add_option("--index", ex_index, "index file")->required();
    ex->add_option("--out", ex_out, "embeddings csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    for (auto* sub : app.get_subcommands()) apply_config(*sub, config_path);
    apply_seed_env(app, seed);
    if (workers < 1) throw ConfigError("--workers must be >= 1");

    if (gen->parsed()) {
        gen_cfg.seed = seed;
        auto vocab = nas_vocab();
        auto ds = generate_dataset(gen_cfg, vocab);
        save_corpus(gen_out, ds.graphs, vocab);
        if (!gen_vocab_out.empty()) vocab.save(gen_vocab_out);
        if (!gen_manifest.empty()) {
            std::ofstream out(gen_manifest);
            if (!out) throw DataError("cannot write manifest: " + gen_manifest);
            out << dataset_manifest(ds).dump(2) << "\n";
        }
        std::cerr << "wrote " << ds.graphs.size() << " graphs to " << gen_out
                  << "\n";
    } else if (split->parsed()) {
        if (split_frac <= 0.0 || split_frac >= 1.0)
            throw ConfigError("--test-frac must be in (0,1)");
        auto vocab = OperatorVocab::load(split_vocab);
        auto corpus = load_corpus(split_in, vocab);
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
            if (!corpus.graphs[i].label)
                throw DataError("split needs class labels on every record");
            by_class[*corpus.graphs[i].label].push_back(i);
        }
        Rng rng(seed);
        std::vector<CompGraph> train, test;
        for (auto& [cls, ids] : by_class) {
            if (ids.size() < 2) {
                std::cerr << "warning: class " << cls
                          << " has a single member; keeping it in train\n";
                train.push_back(corpus.graphs[ids[0]]);
                continue;
            }
            rng.shuffle(ids);
            std::size_t held = static_cast<std::size_t>(
                std::max(1.0, std::floor(split_frac *
                                         static_cast<double>(ids.size()))));
            held = std::min(held, ids.size() - 1);
            for (std::size_t i = 0; i < ids.size(); ++i)
                (i < held ? test : train).push_back(corpus.graphs[ids[i]]);
        }
        save_corpus(split_train, train, vocab);
        save_corpus(split_test, test, vocab);
        std::cerr << "train " << train.size() << " / test " << test.size()
                  << "\n";
    } else if (mine->parsed()) {
        auto vocab = OperatorVocab::load(mine_vocab);
        auto stop = load_stoplist(mine_stoplist);
        auto corpus = load_corpus(mine_in, vocab, stop.empty() ? nullptr : &stop);
        MiningSetup setup = mine_flags.to_setup(seed);
        if (setup.strategy != SplitStrategy::Ours)
            throw ConfigError("mine only supports --split ours");
        auto prepared = prepare_corpus(corpus.graphs, vocab, setup);
        nlohmann::json j;
        j["graphs"] = corpus.graphs.size();
        j["unknown_ops"] = corpus.stats.unknown_ops;
        j["dropped_nodes"] = corpus.stats.dropped_nodes;
        j["label_table_size"] = prepared.table.size();
        j["patterns"] = nlohmann::json::array();
        for (const auto& p : prepared.patterns) {
            nlohmann::json pj;
            pj["key"] = p.canon_key;
            pj["length"] = p.length();
            pj["frequency"] = p.frequency;
            pj["singleton_fallback"] = p.singleton_fallback;
            j["patterns"].push_back(std::move(pj));
        }
        std::ofstream out(mine_out);
        if (!out) throw DataError("cannot write pattern report: " + mine_out);
        out << j.dump(2) << "\n";
        std::cerr << "mined " << prepared.patterns.size() << " patterns\n";
    } else if (tm->parsed()) {
        auto vocab = OperatorVocab::load(tm_vocab);
        auto stop = load_stoplist(tm_stoplist);
        auto corpus = load_corpus(tm_in, vocab, stop.empty() ? nullptr : &stop);
        MiningSetup setup = tm_mining.to_setup(seed);
        auto prepared = prepare_corpus(corpus.graphs, vocab, setup);
        auto cfg = tm_stage.to_config(seed);
        auto result = stage1_train(prepared, vocab, cfg);
        save_stage1(result, vocab.size(), tm_out);
        if (!tm_log.empty()) write_training_log(result.curve, tm_log);
        std::cerr << "stage 1 done; skipped " << result.skipped_single_motif
                  << " single-motif graphs; final loss "
                  << result.curve.back().mean_loss << "\n";
    } else if (tg->parsed()) {
        auto vocab = OperatorVocab::load(tg_vocab);
        auto stop = load_stoplist(tg_stoplist);
        auto corpus = load_corpus(tg_in, vocab, stop.empty() ? nullptr : &stop);
        auto [f_s, f_c] = load_stage1(tg_stage1);
        (void)f_c;  // the context encoder is not used after stage 1
        MiningSetup setup = tg_mining.to_setup(seed);
        auto prepared = prepare_corpus(corpus.graphs, vocab, setup);
        auto macros = build_macro_graphs(corpus.graphs, prepared, f_s);
        auto cfg = tg_stage.to_config(seed);
        auto result = stage2_train(macros, cfg, parse_loss_mode(tg_loss));
        TrainedModels models;
        models.f_s = std::move(f_s);
        models.f_m = std::move(result.f_m);
        models.head = std::move(result.head);
        models.mining = setup;
        models.vocab_size = vocab.size();
        save_models(models, tg_out);
        if (!tg_log.empty()) write_training_log(result.curve, tg_log);
        std::cerr << "stage 2 done; final loss "
                  << result.curve.back().mean_loss << "\n";
    } else if (embed->parsed()) {
        auto vocab = OperatorVocab::load(em_vocab);
        auto stop = load_stoplist(em_stoplist);
        auto corpus = load_corpus(em_in, vocab, stop.empty() ? nullptr : &stop);
        auto models = load_models(em_models);
        if (models.vocab_size != vocab.size())
            throw DataError("model bundle was trained with a different "
                            "vocabulary size");
        EmbeddingIndex idx;
        if (em_per_graph || models.mining.strategy != SplitStrategy::Ours) {
            for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
                const auto& g = corpus.graphs[i];
                auto vec = embed_architecture(g, models, vocab);
                std::string id = g.meta.model_name.empty()
                                     ? "g" + std::to_string(i)
                                     : g.meta.model_name;
                idx.add(id, g.label.value_or(-1), std::move(vec));
            }
        } else {
            // mine patterns over this corpus once and share the label table
            LabelTable table;
            std::vector<EncodedSequence> seqs;
            for (const auto& g : corpus.graphs)
                seqs.push_back(encode(g, models.mining.encode, table));
            auto patterns = mine_motifs(seqs, table, models.mining.mining);
            for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
                const auto& g = corpus.graphs[i];
                auto vec =
                    embed_architecture(g, models, vocab, &patterns, &table);
                std::string id = g.meta.model_name.empty()
                                     ? "g" + std::to_string(i)
                                     : g.meta.model_name;
                idx.add(id, g.label.value_or(-1), std::move(vec));
            }
        }
        idx.export_csv(em_out);
        std::cerr << "embedded " << idx.size() << " graphs\n";
    } else if (index->parsed()) {
        auto idx = index_from_csv(ix_in);
        if (idx.size() == 0) throw DataError("embeddings csv is empty");
        idx.save(ix_out);
        std::cerr << "indexed " << idx.size() << " embeddings (dim "
                  << idx.dim() << ")\n";
    } else if (q->parsed()) {
        auto idx = EmbeddingIndex::load(q_index);
        std::optional<std::size_t> qi;
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx.entry(i).id == q_id) qi = i;
        if (!qi) throw DataError("query id not in the index: " + q_id);
        auto res = query(idx, idx.vector(*qi), q_k, !q_include_self, q_id);
        std::ostringstream csv;
        csv << "rank,id,label,score\n";
        csv.precision(17);
        for (std::size_t r = 0; r < res.hits.size(); ++r) {
            const auto& e = idx.entry(res.hits[r].index);
            csv << (r + 1) << "," << e.id << "," << e.label << ","
                << res.hits[r].score << "\n";
        }
        if (q_out.empty()) {
            std::cout << csv.str();
        } else {
            std::ofstream out(q_out);
            if (!out) throw DataError("cannot write results: " + q_out);
            out << csv.str();
        }
    } else if (ev->parsed()) {
        auto idx = EmbeddingIndex::load(ev_index);
        if (idx.size() == 0) throw DataError("index is empty");
        std::vector<std::string> ids;
        std::vector<int> labels;
        std::vector<std::vector<double>> vecs;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            ids.push_back(idx.entry(i).id);
            labels.push_back(idx.entry(i).label);
            vecs.push_back(idx.vector(i));
        }
        auto rep = evaluate_retrieval(idx, ids, labels, vecs,
                                      parse_cutoffs(ev_cutoffs),
                                      !ev_include_self);
        write_metrics_csv(rep, ev_out);
        std::cerr << "evaluated " << rep.query_count << " queries\n";
    } else if (ex->parsed()) {
        auto idx = EmbeddingIndex::load(ex_index);
        idx.export_csv(ex_out);
        std::cerr << "exported " << idx.size() << " embeddings\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
