#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "narx/errors.hpp"
#include "narx/gcn.hpp"

namespace narx {

struct IndexEntry {
    std::string id;
    int label = -1;
};

// Append-only embedding store answering exact cosine top-k.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    explicit EmbeddingIndex(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }

    void add(std::string id, int label, std::vector<double> vec) {
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_)
            throw DataError("index: embedding dimension mismatch for " + id);
        for (const auto& e : entries_)
            if (e.id == id) throw DataError("index: duplicate id " + id);
        entries_.push_back({std::move(id), label});
        vectors_.push_back(std::move(vec));
    }

    const IndexEntry& entry(std::size_t i) const { return entries_[i]; }
    const std::vector<double>& vector(std::size_t i) const { return vectors_[i]; }

    // binary format: magic, version, dim, count, then per item
    // (id length, id bytes, label, vector doubles)
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write index file: " + path);
        const char magic[8] = {'N', 'A', 'R', 'X', 'I', 'D', 'X', '\0'};
        out.write(magic, 8);
        std::uint32_t version = 1;
        std::uint64_t dim = dim_, count = entries_.size();
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
        out.write(reinterpret_cast<const char*>(&count), sizeof count);
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            std::uint32_t len = static_cast<std::uint32_t>(entries_[i].id.size());
            out.write(reinterpret_cast<const char*>(&len), sizeof len);
            out.write(entries_[i].id.data(), len);
            std::int32_t label = entries_[i].label;
            out.write(reinterpret_cast<const char*>(&label), sizeof label);
            out.write(reinterpret_cast<const char*>(vectors_[i].data()),
                      static_cast<std::streamsize>(dim_ * sizeof(double)));
        }
    }

    static EmbeddingIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open index file: " + path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::string(magic, 7) != "NARXIDX")
            throw DataError("not an index file: " + path);
        std::uint32_t version;
        std::uint64_t dim, count;
        in.read(reinterpret_cast<char*>(&version), sizeof version);
        in.read(reinterpret_cast<char*>(&dim), sizeof dim);
        in.read(reinterpret_cast<char*>(&count), sizeof count);
        if (!in || version != 1) throw DataError("unsupported index version");
        EmbeddingIndex idx(dim);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint32_t len;
            in.read(reinterpret_cast<char*>(&len), sizeof len);
            std::string id(len, '\0');
            in.read(id.data(), len);
            std::int32_t label;
            in.read(reinterpret_cast<char*>(&label), sizeof label);
            std::vector<double> vec(dim);
            in.read(reinterpret_cast<char*>(vec.data()),
                    static_cast<std::streamsize>(dim * sizeof(double)));
            if (!in) throw DataError("truncated index file: " + path);
            idx.add(std::move(id), label, std::move(vec));
        }
        return idx;
    }

    void export_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write csv: " + path);
        out << "id,label";
        for (std::size_t d = 0; d < dim_; ++d) out << ",v" << d;
        out << "\n";
        out.precision(17);
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            out << entries_[i].id << "," << entries_[i].label;
            for (double v : vectors_[i]) out << "," << v;
            out << "\n";
        }
    }

private:
    std::size_t dim_ = 0;
    std::vector<IndexEntry> entries_;
    std::vector<std::vector<double>> vectors_;
};

struct Hit {
    std::size_t index;  // position in the EmbeddingIndex
    double score;
};

struct RankedResult {
    std::string query_id;
    std::vector<Hit> hits;  // scores non-increasing
};

// Exhaustive exact cosine search: descending score, ties by ascending index.
inline RankedResult query(const EmbeddingIndex& index,
                          const std::vector<double>& h_q, std::size_t k,
                          bool exclude_self = true,
                          const std::string& query_id = "") {
    if (k < 1) throw ConfigError("query: K must be >= 1");
    if (index.size() > 0 && h_q.size() != index.dim())
        throw DataError("query: dimension mismatch");
    RankedResult r;
    r.query_id = query_id;
    std::vector<Hit> all;
    all.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (exclude_self && !query_id.empty() && index.entry(i).id == query_id)
            continue;
        all.push_back({i, cosine(h_q, index.vector(i))});
    }
    std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.index < b.index;
    });
    if (all.size() > k) all.resize(k);
    r.hits = std::move(all);
    return r;
}

// Relevance = hit shares the query's class label.
struct MetricReport {
    std::vector<std::size_t> cutoffs;
    std::vector<double> mrr, map, ndcg;
    std::size_t query_count = 0;
};

namespace detail {

inline double average_precision(const std::vector<bool>& rel, std::size_t k,
                                std::size_t total_relevant) {
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, rel.size());
    for (std::size_t i = 0; i < upto; ++i) {
        if (rel[i]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    const std::size_t denom = std::min(k, total_relevant);
    return denom == 0 ? 0.0 : sum / static_cast<double>(denom);
}

inline double reciprocal_rank(const std::vector<bool>& rel, std::size_t k) {
    const std::size_t upto = std::min(k, rel.size());
    for (std::size_t i = 0; i < upto; ++i)
        if (rel[i]) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

inline double ndcg(const std::vector<bool>& rel, std::size_t k,
                   std::size_t total_relevant) {
    const std::size_t upto = std::min(k, rel.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < upto; ++i)
        if (rel[i]) dcg += 1.0 / std::log2(static_cast<double>(i + 2));
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, total_relevant);
    for (std::size_t i = 0; i < ideal; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i + 2));
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

}  // namespace detail

// Binary relevance lists, one per query, already truncated or not; metrics
// apply their own cutoff. total_relevant counts all relevant items in the
// index for that query (not only retrieved ones).
struct JudgedQuery {
    std::vector<bool> relevance;   // per ranked hit
    std::size_t total_relevant = 0;
};

inline double mrr_at_k(const std::vector<JudgedQuery>& queries, std::size_t k) {
    if (queries.empty()) throw DataError("mrr: no queries");
    double s = 0.0;
    for (const auto& q : queries) s += detail::reciprocal_rank(q.relevance, k);
    return s / static_cast<double>(queries.size());
}

inline double map_at_k(const std::vector<JudgedQuery>& queries, std::size_t k) {
    if (queries.empty()) throw DataError("map: no queries");
    double s = 0.0;
    for (const auto& q : queries)
        s += detail::average_precision(q.relevance, k, q.total_relevant);
    return s / static_cast<double>(queries.size());
}

inline double ndcg_at_k(const std::vector<JudgedQuery>& queries, std::size_t k) {
    if (queries.empty()) throw DataError("ndcg: no queries");
    double s = 0.0;
    for (const auto& q : queries)
        s += detail::ndcg(q.relevance, k, q.total_relevant);
    return s / static_cast<double>(queries.size());
}

// Evaluate retrieval of `queries` (id,label,vector) against the index with a
// same-label relevance oracle.
inline MetricReport evaluate_retrieval(
    const EmbeddingIndex& index,
    const std::vector<std::string>& query_ids,
    const std::vector<int>& query_labels,
    const std::vector<std::vector<double>>& query_vectors,
    const std::vector<std::size_t>& cutoffs, bool exclude_self = true) {
    if (query_ids.empty()) throw DataError("evaluate: no queries");
    const std::size_t max_k =
        *std::max_element(cutoffs.begin(), cutoffs.end());
    std::vector<JudgedQuery> judged;
    judged.reserve(query_ids.size());
    for (std::size_t qi = 0; qi < query_ids.size(); ++qi) {
        auto res = query(index, query_vectors[qi], max_k, exclude_self,
                         query_ids[qi]);
        JudgedQuery jq;
        for (const auto& h : res.hits)
            jq.relevance.push_back(index.entry(h.index).label == query_labels[qi]);
        for (std::size_t i = 0; i < index.size(); ++i) {
            if (exclude_self && index.entry(i).id == query_ids[qi]) continue;
            if (index.entry(i).label == query_labels[qi]) ++jq.total_relevant;
        }
        judged.push_back(std::move(jq));
    }
    MetricReport rep;
    rep.cutoffs = cutoffs;
    rep.query_count = query_ids.size();
    for (auto k : cutoffs) {
        rep.mrr.push_back(mrr_at_k(judged, k));
        rep.map.push_back(map_at_k(judged, k));
        rep.ndcg.push_back(ndcg_at_k(judged, k));
    }
    return rep;
}

inline void write_metrics_csv(const MetricReport& rep, std::ostream& out) {
    out << "metric,cutoff,value\n";
    out.precision(17);
    for (std::size_t i = 0; i < rep.cutoffs.size(); ++i) {
        out << "mrr," << rep.cutoffs[i] << "," << rep.mrr[i] << "\n";
        out << "map," << rep.cutoffs[i] << "," << rep.map[i] << "\n";
        out << "ndcg," << rep.cutoffs[i] << "," << rep.ndcg[i] << "\n";
    }
}

inline void write_metrics_csv(const MetricReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write metrics csv: " + path);
    write_metrics_csv(rep, out);
}

}  // namespace narx
