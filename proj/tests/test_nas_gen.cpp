#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "narx/nas_gen.hpp"

using namespace narx;

TEST_CASE("legal sources grow with the add index") {
    CHECK(legal_sources(0) == std::vector<int>{-2, -1});
    CHECK(legal_sources(1) == std::vector<int>{-2, -1, 0});
    CHECK(legal_sources(2) == std::vector<int>{-2, -1, 0, 1});
    CHECK(legal_sources(3) == std::vector<int>{-2, -1, 0, 1, 2});
}

TEST_CASE("sampled cells are well-formed") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        CellSpec s = sample_cell(rng);
        for (std::size_t i = 0; i < 4; ++i) {
            auto legal = legal_sources(i);
            for (const auto& c : s.adds[i]) {
                CHECK(std::find(legal.begin(), legal.end(), c.source) !=
                      legal.end());
                CHECK(c.op < 7);
            }
            // two distinct sources, kept sorted
            CHECK(s.adds[i][0].source != s.adds[i][1].source);
            CHECK(!(s.adds[i][1] < s.adds[i][0]));
        }
    }
}

TEST_CASE("cell graph has 13n+3 nodes and a single sink") {
    auto vocab = nas_vocab();
    Rng rng(2);
    for (std::size_t cells : {1u, 3u, 6u}) {
        CellSpec s = sample_cell(rng);
        CompGraph g = cell_to_graph(s, cells, vocab);
        CHECK(g.num_nodes() == 13 * cells + 3);
        // 8 op nodes per cell
        std::size_t op_nodes = 0;
        for (auto op : g.node_ops) {
            const auto& name = vocab.name(op);
            if (name != "stem_conv" && name != "add" && name != "concat" &&
                name != "global_avg_pool" && name != "fc")
                ++op_nodes;
        }
        CHECK(op_nodes == 8 * cells);
        // exactly one sink (the fc node)
        auto ch = g.children();
        std::size_t sinks = 0;
        for (const auto& c : ch)
            if (c.empty()) ++sinks;
        CHECK(sinks == 1);
        CHECK(vocab.name(g.node_ops.back()) == "fc");
        topological_order(g);  // acyclic
    }
    CHECK_THROWS_AS(cell_to_graph(sample_cell(rng), 0, vocab), ConfigError);
}

TEST_CASE("genotype distance is a metric on canonical forms") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        CellSpec a = sample_cell(rng), b = sample_cell(rng),
                 c = sample_cell(rng);
        CHECK(genotype_distance(a, a) == 0);
        CHECK(genotype_distance(a, b) == genotype_distance(b, a));
        CHECK(genotype_distance(a, c) <=
              genotype_distance(a, b) + genotype_distance(b, c));
        CHECK(genotype_distance(a, b) <= 8);
    }
}

TEST_CASE("mutate_slot moves the genotype by one edit") {
    // one edit changes 1 canonical slot, or 2 when the edit re-sorts the pair
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        CellSpec a = sample_cell(rng);
        CellSpec b = a;
        mutate_slot(b, rng);
        auto d = genotype_distance(a, b);
        CHECK(d >= 1);
        CHECK(d <= 2);
    }
}

TEST_CASE("cell spec json round-trip") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        CellSpec a = sample_cell(rng);
        CHECK(CellSpec::from_json(a.to_json()) == a);
    }
}

TEST_CASE("dataset generation is seed-reproducible") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 30;
    cfg.num_classes = 3;
    cfg.seed = 42;
    auto a = generate_dataset(cfg, vocab);
    auto b = generate_dataset(cfg, vocab);
    REQUIRE(a.graphs.size() == 30);
    for (std::size_t i = 0; i < a.graphs.size(); ++i)
        CHECK(a.graphs[i] == b.graphs[i]);
    for (std::size_t i = 0; i < a.centers.size(); ++i)
        CHECK(a.centers[i] == b.centers[i]);

    cfg.seed = 43;
    auto c = generate_dataset(cfg, vocab);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.graphs.size(); ++i)
        if (!(a.graphs[i] == c.graphs[i])) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("class sizes are balanced and labels round-robin") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 25;
    cfg.num_classes = 5;
    cfg.seed = 7;
    auto ds = generate_dataset(cfg, vocab);
    std::vector<std::size_t> counts(cfg.num_classes, 0);
    for (const auto& g : ds.graphs) {
        REQUIRE(g.label.has_value());
        ++counts[static_cast<std::size_t>(*g.label)];
    }
    for (auto c : counts) CHECK(c == 5);
}

TEST_CASE("centers respect the pairwise separation") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 10;
    cfg.num_classes = 10;
    cfg.seed = 11;
    auto ds = generate_dataset(cfg, vocab);
    for (std::size_t i = 0; i < ds.centers.size(); ++i)
        for (std::size_t j = i + 1; j < ds.centers.size(); ++j)
            CHECK(genotype_distance(ds.centers[i], ds.centers[j]) >=
                  cfg.center_separation);
}

TEST_CASE("members are arg-min consistent with their own center") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 40;
    cfg.num_classes = 4;
    cfg.seed = 13;
    cfg.num_cells = 1;
    auto ds = generate_dataset(cfg, vocab);
    // re-derive each member's genotype distance to every center via the graph
    // label: its own class center must be the unique nearest one. We can't
    // recover the genotype from the graph, so instead regenerate and verify
    // radii through the recorded centers using a fresh draw with radius 0.
    NasDatasetConfig tight = cfg;
    tight.max_radius = 0;
    auto exact = generate_dataset(tight, vocab);
    // with radius 0 every member is its center's graph
    for (std::size_t i = 0; i < exact.graphs.size(); ++i) {
        auto cls = static_cast<std::size_t>(*exact.graphs[i].label);
        auto center_graph =
            cell_to_graph(exact.centers[cls], tight.num_cells, vocab);
        CHECK(exact.graphs[i].node_ops == center_graph.node_ops);
        CHECK(exact.graphs[i].edges == center_graph.edges);
    }
}

TEST_CASE("generation fails loudly when centers cannot be placed") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 10;
    // at full separation every slot must differ, so the first ADD node's op
    // slots admit at most 7 mutually distinct centers
    cfg.num_classes = 10;
    cfg.center_separation = 8;
    cfg.seed = 1;
    CHECK_THROWS_AS(generate_dataset(cfg, vocab), NumericError);
    NasDatasetConfig one;
    one.num_classes = 1;
    CHECK_THROWS_AS(generate_dataset(one, vocab), ConfigError);
}

TEST_CASE("dataset manifest records the generation parameters") {
    auto vocab = nas_vocab();
    NasDatasetConfig cfg;
    cfg.n = 6;
    cfg.num_classes = 2;
    cfg.seed = 99;
    auto ds = generate_dataset(cfg, vocab);
    auto j = dataset_manifest(ds);
    CHECK(j["seed"] == 99);
    CHECK(j["n"] == 6);
    CHECK(j["num_classes"] == 2);
    CHECK(j["centers"].size() == 2);
}
