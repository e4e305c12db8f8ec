#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "narx/retrieval.hpp"
#include "narx/rng.hpp"

using namespace narx;

namespace {

EmbeddingIndex tiny_index() {
    EmbeddingIndex idx(2);
    idx.add("a", 0, {1.0, 0.0});
    idx.add("b", 0, {0.8, 0.2});
    idx.add("c", 1, {0.0, 1.0});
    idx.add("d", 1, {-1.0, 0.0});
    return idx;
}

}  // namespace

TEST_CASE("index rejects dimension mismatches and duplicate ids") {
    EmbeddingIndex idx(2);
    idx.add("x", 0, {1.0, 2.0});
    CHECK_THROWS_AS(idx.add("y", 0, std::vector<double>{1.0}), DataError);
    CHECK_THROWS_AS(idx.add("x", 1, std::vector<double>{3.0, 4.0}), DataError);
    CHECK(idx.size() == 1);
}

TEST_CASE("index binary round-trip") {
    auto idx = tiny_index();
    const std::string path = "idx_rt.bin";
    idx.save(path);
    auto back = EmbeddingIndex::load(path);
    REQUIRE(back.size() == idx.size());
    CHECK(back.dim() == idx.dim());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(back.entry(i).id == idx.entry(i).id);
        CHECK(back.entry(i).label == idx.entry(i).label);
        CHECK(back.vector(i) == idx.vector(i));
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(EmbeddingIndex::load("no_such_file.bin"), DataError);
}

TEST_CASE("load rejects non-index files") {
    const std::string path = "not_an_index.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage garbage garbage";
    }
    CHECK_THROWS_AS(EmbeddingIndex::load(path), DataError);
    std::remove(path.c_str());
}

TEST_CASE("query matches a brute-force cosine ranking") {
    Rng rng(23);
    EmbeddingIndex idx(4);
    std::vector<std::vector<double>> vecs;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.next_normal();
        idx.add("m" + std::to_string(i), i % 3, v);
        vecs.push_back(std::move(v));
    }
    std::vector<double> q(4);
    for (auto& x : q) x = rng.next_normal();
    auto res = query(idx, q, 10, false);
    REQUIRE(res.hits.size() == 10);
    // brute force
    std::vector<std::pair<double, std::size_t>> brute;
    for (std::size_t i = 0; i < vecs.size(); ++i)
        brute.push_back({cosine(q, vecs[i]), i});
    std::sort(brute.begin(), brute.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; i < res.hits.size(); ++i) {
        CHECK(res.hits[i].index == brute[i].second);
        CHECK_THAT(res.hits[i].score,
                   Catch::Matchers::WithinAbs(brute[i].first, 1e-14));
    }
    // scores are non-increasing
    for (std::size_t i = 1; i < res.hits.size(); ++i)
        CHECK(res.hits[i - 1].score >= res.hits[i].score);
}

TEST_CASE("ranking ignores the query vector's scale") {
    auto idx = tiny_index();
    std::vector<double> q = {0.6, 0.4};
    std::vector<double> q2 = {6.0, 4.0};
    auto r1 = query(idx, q, 4, false);
    auto r2 = query(idx, q2, 4, false);
    REQUIRE(r1.hits.size() == r2.hits.size());
    for (std::size_t i = 0; i < r1.hits.size(); ++i)
        CHECK(r1.hits[i].index == r2.hits[i].index);
}

TEST_CASE("score ties break by ascending index") {
    EmbeddingIndex idx(2);
    idx.add("p", 0, {1.0, 0.0});
    idx.add("q", 0, {2.0, 0.0});  // same direction, same cosine
    idx.add("r", 0, {0.0, 1.0});
    auto res = query(idx, {1.0, 0.0}, 3, false);
    CHECK(res.hits[0].index == 0);
    CHECK(res.hits[1].index == 1);
    CHECK(res.hits[2].index == 2);
}

TEST_CASE("self-exclusion and K larger than the index") {
    auto idx = tiny_index();
    auto with_self = query(idx, {1.0, 0.0}, 10, false, "a");
    CHECK(with_self.hits.size() == 4);
    CHECK(with_self.hits[0].index == 0);
    auto no_self = query(idx, {1.0, 0.0}, 10, true, "a");
    CHECK(no_self.hits.size() == 3);
    for (const auto& h : no_self.hits) CHECK(idx.entry(h.index).id != "a");
    CHECK_THROWS_AS(query(idx, {1.0, 0.0}, 0), ConfigError);
    CHECK_THROWS_AS(query(idx, {1.0, 0.0, 0.0}, 2), DataError);
}

TEST_CASE("MAP oracle: R,N,R,N,R at K=5 gives 0.7556") {
    JudgedQuery q;
    q.relevance = {true, false, true, false, true};
    q.total_relevant = 3;
    double v = map_at_k({q}, 5);
    double expect = (1.0 / 1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0;
    CHECK_THAT(v, Catch::Matchers::WithinAbs(expect, 1e-12));
    CHECK_THAT(v, Catch::Matchers::WithinAbs(0.755555555555556, 1e-9));
}

TEST_CASE("MAP denominator is min(K, total relevant)") {
    JudgedQuery q;
    q.relevance = {true, true};
    q.total_relevant = 10;  // more relevant than K
    // denominator min(2,10)=2 -> AP = (1 + 1)/2 = 1
    CHECK_THAT(map_at_k({q}, 2), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("MRR oracle: ranks 1 and 2 average to 0.75") {
    JudgedQuery q1, q2;
    q1.relevance = {true, false, false};
    q1.total_relevant = 1;
    q2.relevance = {false, true, false};
    q2.total_relevant = 1;
    CHECK_THAT(mrr_at_k({q1, q2}, 3), Catch::Matchers::WithinAbs(0.75, 1e-12));
    // no relevant hit contributes zero
    JudgedQuery q3;
    q3.relevance = {false, false};
    q3.total_relevant = 1;
    CHECK_THAT(mrr_at_k({q3}, 2), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("NDCG oracle: single relevant at rank 2 gives 1/log2(3)") {
    JudgedQuery q;
    q.relevance = {false, true, false};
    q.total_relevant = 1;
    CHECK_THAT(ndcg_at_k({q}, 3),
               Catch::Matchers::WithinAbs(1.0 / std::log2(3.0), 1e-12));
    // perfect ranking gives 1
    JudgedQuery p;
    p.relevance = {true, true, false};
    p.total_relevant = 2;
    CHECK_THAT(ndcg_at_k({p}, 3), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("metric functions reject empty query sets") {
    CHECK_THROWS_AS(mrr_at_k({}, 5), DataError);
    CHECK_THROWS_AS(map_at_k({}, 5), DataError);
    CHECK_THROWS_AS(ndcg_at_k({}, 5), DataError);
}

TEST_CASE("evaluate_retrieval uses the same-label oracle") {
    auto idx = tiny_index();
    // query each indexed item against the rest
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> vecs;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        ids.push_back(idx.entry(i).id);
        labels.push_back(idx.entry(i).label);
        vecs.push_back(idx.vector(i));
    }
    auto rep = evaluate_retrieval(idx, ids, labels, vecs, {1, 3});
    REQUIRE(rep.cutoffs == std::vector<std::size_t>{1, 3});
    CHECK(rep.query_count == 4);
    // "a" retrieves b (label 0) first; "b" retrieves a first; both perfect.
    // "c": nearest by cosine is b (0.2426) then a (0) then d (0); relevant d
    // is ranked 3rd by the tie-break, "d": c at rank ... check values finite
    for (double v : rep.mrr) CHECK(v > 0.0);
    for (std::size_t i = 0; i < rep.mrr.size(); ++i) {
        CHECK(rep.mrr[i] <= 1.0);
        CHECK(rep.map[i] <= 1.0);
        CHECK(rep.ndcg[i] <= 1.0);
    }
    // MRR@1: a->b relevant (1), b->a relevant (1), c->b irrelevant (0),
    // d->c? cosine(d,a)=-1, (d,b) negative, (d,c)=0 -> c first -> relevant (1)
    CHECK_THAT(rep.mrr[0], Catch::Matchers::WithinAbs(0.75, 1e-12));
}

TEST_CASE("metrics csv has the fixed header and row order") {
    MetricReport rep;
    rep.cutoffs = {2, 5};
    rep.mrr = {0.5, 0.75};
    rep.map = {0.25, 0.5};
    rep.ndcg = {0.125, 0.25};
    std::ostringstream out;
    write_metrics_csv(rep, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "metric,cutoff,value");
    std::getline(in, line);
    CHECK(line.rfind("mrr,2,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("map,2,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("ndcg,2,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("mrr,5,", 0) == 0);
}

TEST_CASE("embedding csv export") {
    auto idx = tiny_index();
    const std::string path = "emb.csv";
    idx.export_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "id,label,v0,v1");
    std::string row;
    std::getline(in, row);
    CHECK(row.rfind("a,0,", 0) == 0);
    std::size_t rows = 1;
    while (std::getline(in, row))
        if (!row.empty()) ++rows;
    CHECK(rows == 4);
    std::remove(path.c_str());
}
