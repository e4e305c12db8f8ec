#include <catch2/catch_amalgamated.hpp>

#include "narx/macro_graph.hpp"
#include "narx/rng.hpp"

using namespace narx;

namespace {

CompGraph chain(std::initializer_list<std::uint32_t> ops) {
    CompGraph g;
    g.node_ops = ops;
    for (std::uint32_t i = 1; i < g.node_ops.size(); ++i)
        g.edges.emplace_back(i - 1, i);
    return g;
}

std::vector<std::vector<double>> embeds(std::size_t n, std::size_t dim = 3) {
    std::vector<std::vector<double>> e(n, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) e[i][0] = static_cast<double>(i + 1);
    return e;
}

}  // namespace

TEST_CASE("crossing edges become macro edges") {
    CompGraph g = chain({0, 1, 2, 3});
    std::vector<MotifOccurrence> occs = {
        make_occurrence(g, 0, 0, {0, 1}, 0),
        make_occurrence(g, 0, 1, {2, 3}, 0),
    };
    auto mg = build_macro(g, occs, embeds(2));
    CHECK(mg.num_nodes() == 2);
    REQUIRE(mg.edges.size() == 1);
    CHECK(mg.edges[0] == Edge{0, 1});
}

TEST_CASE("single occurrence gives one macro node and no edges") {
    CompGraph g = chain({0, 1, 2});
    std::vector<MotifOccurrence> occs = {make_occurrence(g, 0, 0, {0, 1, 2}, 1)};
    auto mg = build_macro(g, occs, embeds(1));
    CHECK(mg.num_nodes() == 1);
    CHECK(mg.edges.empty());
}

TEST_CASE("shared expanded edge links the earlier core to the later one") {
    // cores {2} and {3} don't touch, but with one reverse expansion step both
    // expanded subgraphs contain the edge 1->2... build: 0->1->2, 1->3
    CompGraph g;
    g.node_ops = {0, 1, 2, 2};
    g.edges = {{0, 1}, {1, 2}, {1, 3}};
    std::vector<MotifOccurrence> occs = {
        make_occurrence(g, 0, 0, {0, 1}, 0),
        make_occurrence(g, 0, 1, {2}, 1),  // expanded {1,2}
        make_occurrence(g, 0, 2, {3}, 1),  // expanded {1,3}
    };
    auto mg = build_macro(g, occs, embeds(3));
    // rule (a): 0->1 (edge 1->2), 0->2 (edge 1->3)
    // rule (b): occurrences 1 and 2 share node 1 but no full edge, so nothing
    CHECK(mg.edges == std::vector<Edge>{{0, 1}, {0, 2}});

    // now make the two late occurrences share a whole edge by expanding twice
    std::vector<MotifOccurrence> occs2 = {
        make_occurrence(g, 0, 0, {0, 1}, 0),
        make_occurrence(g, 0, 1, {2}, 2),  // expanded {0,1,2}
        make_occurrence(g, 0, 2, {3}, 2),  // expanded {0,1,3}
    };
    auto mg2 = build_macro(g, occs2, embeds(3));
    // shared edge 0->1 between occurrences 1 and 2; core 2 precedes core 3
    bool has_b = false;
    for (const auto& e : mg2.edges)
        if (e == Edge{1, 2}) has_b = true;
    CHECK(has_b);
}

TEST_CASE("macro graph copies the label and embeddings") {
    CompGraph g = chain({0, 1});
    g.label = 7;
    std::vector<MotifOccurrence> occs = {make_occurrence(g, 0, 0, {0}, 0),
                                         make_occurrence(g, 0, 1, {1}, 0)};
    auto e = embeds(2, 4);
    auto mg = build_macro(g, occs, e);
    CHECK(mg.label == 7);
    CHECK(mg.node_embeddings == e);
    auto f = mg.feature_matrix();
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 4);
    CHECK(f(1, 0) == 2.0);
    auto a = mg.adjacency_matrix();
    CHECK(a(0, 1) == 1.0);
}

TEST_CASE("build_macro validates its inputs") {
    CompGraph g = chain({0, 1, 2});
    std::vector<MotifOccurrence> cover = {make_occurrence(g, 0, 0, {0, 1}, 0),
                                          make_occurrence(g, 0, 1, {2}, 0)};
    // embedding count mismatch
    CHECK_THROWS_AS(build_macro(g, cover, embeds(1)), DataError);
    // dimension mismatch
    auto bad_dims = embeds(2);
    bad_dims[1].push_back(0.0);
    CHECK_THROWS_AS(build_macro(g, cover, bad_dims), NumericError);
    // overlapping cores
    std::vector<MotifOccurrence> overlap = {
        make_occurrence(g, 0, 0, {0, 1}, 0),
        make_occurrence(g, 0, 1, {1, 2}, 0)};
    CHECK_THROWS_AS(build_macro(g, overlap, embeds(2)), DataError);
    // uncovered node
    std::vector<MotifOccurrence> partial = {make_occurrence(g, 0, 0, {0}, 0)};
    CHECK_THROWS_AS(build_macro(g, partial, embeds(1)), DataError);
}

TEST_CASE("macro node count never exceeds the graph node count") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        CompGraph g;
        const std::size_t n = 3 + rng.next_below(12);
        for (std::size_t i = 0; i < n; ++i)
            g.node_ops.push_back(static_cast<std::uint32_t>(rng.next_below(4)));
        for (std::uint32_t d = 1; d < n; ++d)
            g.edges.emplace_back(static_cast<std::uint32_t>(rng.next_below(d)),
                                 d);
        std::sort(g.edges.begin(), g.edges.end());
        g.edges.erase(std::unique(g.edges.begin(), g.edges.end()),
                      g.edges.end());
        // random contiguous partition of node ids into cores
        std::vector<MotifOccurrence> occs;
        std::uint32_t start = 0;
        while (start < n) {
            std::uint32_t len = 1 + static_cast<std::uint32_t>(
                                        rng.next_below(std::min<std::size_t>(
                                            3, n - start)));
            std::vector<std::uint32_t> core;
            for (std::uint32_t i = start; i < start + len; ++i)
                core.push_back(i);
            occs.push_back(make_occurrence(g, 0, occs.size(), std::move(core), 1));
            start += len;
        }
        auto mg = build_macro(g, occs, embeds(occs.size()));
        CHECK(mg.num_nodes() == occs.size());
        CHECK(mg.num_nodes() <= g.num_nodes());
        for (const auto& [s, d] : mg.edges) {
            CHECK(s != d);
            CHECK(s < mg.num_nodes());
            CHECK(d < mg.num_nodes());
        }
    }
}
