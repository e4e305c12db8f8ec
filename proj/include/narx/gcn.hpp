#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narx/autodiff.hpp"
#include "narx/matrix.hpp"
#include "narx/rng.hpp"

namespace narx {

// D^-1/2 (S + I) D^-1/2 with S the symmetrized adjacency. Diagonal degrees
// are >= 1 after adding self-loops, so the inverse square root is safe.
inline DenseMatrix normalize_adjacency(const DenseMatrix& adj) {
    if (adj.rows() != adj.cols())
        throw NumericError("normalize_adjacency: matrix must be square");
    const std::size_t m = adj.rows();
    DenseMatrix s(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            s(i, j) = std::max(adj(i, j), adj(j, i));
    for (std::size_t i = 0; i < m; ++i) s(i, i) = s(i, i) + 1.0;
    std::vector<double> dinv(m);
    for (std::size_t i = 0; i < m; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < m; ++j) deg += s(i, j);
        dinv[i] = 1.0 / std::sqrt(deg);
    }
    DenseMatrix out(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) out(i, j) = dinv[i] * s(i, j) * dinv[j];
    return out;
}

struct GcnParams {
    std::vector<DenseMatrix> weights;  // W^(0..L-1)
    double dropout_rate = 0.0;

    std::size_t layers() const { return weights.size(); }
    std::size_t in_dim() const { return weights.front().rows(); }
    std::size_t out_dim() const { return weights.back().cols(); }

    static GcnParams init(std::size_t in, std::size_t hidden, std::size_t out,
                          std::size_t layers, double dropout, Rng& rng) {
        if (layers < 1) throw ConfigError("GCN needs at least one layer");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ConfigError("dropout rate must be in [0,1)");
        GcnParams p;
        p.dropout_rate = dropout;
        for (std::size_t l = 0; l < layers; ++l) {
            std::size_t rows = l == 0 ? in : hidden;
            std::size_t cols = l + 1 == layers ? out : hidden;
            DenseMatrix w(rows, cols);
            const double scale = std::sqrt(2.0 / static_cast<double>(rows + cols));
            for (std::size_t i = 0; i < w.size(); ++i)
                w.data()[i] = scale * rng.next_normal();
            p.weights.push_back(std::move(w));
        }
        return p;
    }
};

struct ClassifierHead {
    DenseMatrix weight;  // emb x classes
    DenseMatrix bias;    // 1 x classes

    std::size_t num_classes() const { return weight.cols(); }

    static ClassifierHead init(std::size_t emb, std::size_t classes, Rng& rng) {
        if (classes < 2) throw ConfigError("classifier needs >= 2 classes");
        ClassifierHead h;
        h.weight = DenseMatrix(emb, classes);
        const double scale = std::sqrt(2.0 / static_cast<double>(emb + classes));
        for (std::size_t i = 0; i < h.weight.size(); ++i)
            h.weight.data()[i] = scale * rng.next_normal();
        h.bias = DenseMatrix(1, classes, 0.0);
        return h;
    }
};

// GCN parameters mounted on a tape: one leaf per weight matrix, shared by
// every forward pass recorded on that tape so gradients accumulate across a
// batch.
class GcnOnTape {
public:
    GcnOnTape(ad::Tape& tape, const GcnParams& params) : params_(&params) {
        for (const auto& w : params.weights) vars_.push_back(tape.leaf(w));
    }

    // node_feats rows must match norm_adj dim. Returns (node features after
    // the last layer, mean-readout embedding). ReLU on hidden layers,
    // identity on the output layer; dropout on hidden activations only in
    // train mode.
    std::pair<ad::Var, ad::Var> forward(ad::Tape& tape, const DenseMatrix& feats,
                                        const DenseMatrix& norm_adj,
                                        bool train_mode = false,
                                        Rng* rng = nullptr) const {
        if (feats.rows() != norm_adj.rows())
            throw NumericError("gcn_forward: feature/adjacency row mismatch");
        if (feats.cols() != params_->weights.front().rows())
            throw NumericError("gcn_forward: feature dim does not chain");
        ad::Var h = tape.leaf(feats);
        ad::Var adj = tape.leaf(norm_adj);
        for (std::size_t l = 0; l < vars_.size(); ++l) {
            h = tape.matmul(adj, h);
            h = tape.matmul(h, vars_[l]);
            if (l + 1 < vars_.size()) {
                h = tape.relu(h);
                if (train_mode && params_->dropout_rate > 0.0) {
                    if (!rng)
                        throw ConfigError("train-mode dropout needs an rng");
                    const double keep = 1.0 - params_->dropout_rate;
                    DenseMatrix mask(tape.value(h).rows(), tape.value(h).cols());
                    for (std::size_t i = 0; i < mask.size(); ++i)
                        mask.data()[i] =
                            rng->next_double() < keep ? 1.0 / keep : 0.0;
                    h = tape.hadamard_const(h, std::move(mask));
                }
            }
        }
        return {h, tape.row_mean(h)};
    }

    std::vector<DenseMatrix> gradients(const ad::Tape& tape) const {
        std::vector<DenseMatrix> g;
        g.reserve(vars_.size());
        for (auto v : vars_) g.push_back(tape.gradient(v));
        return g;
    }

    const std::vector<ad::Var>& weight_vars() const { return vars_; }

private:
    const GcnParams* params_;
    std::vector<ad::Var> vars_;
};

// Plain (no-tape) embedding for inference paths.
inline std::vector<double> gcn_embed(const GcnParams& params,
                                     const DenseMatrix& feats,
                                     const DenseMatrix& norm_adj) {
    ad::Tape tape;
    GcnOnTape net(tape, params);
    auto [nodes, emb] = net.forward(tape, feats, norm_adj, false, nullptr);
    (void)nodes;
    return tape.value(emb).raw();
}

// --- similarity and losses (scalar convenience versions) ---

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw NumericError("cosine: dim mismatch");
    const double nu = norm2(u), nv = norm2(v);
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot(u, v) / (nu * nv);
}

// -log( e^{sp/t} / (e^{sp/t} + sum_k e^{sn_k/t}) ) built on a tape so the
// same code path serves training and the scalar oracle tests.
inline ad::Var info_nce_from_sims(ad::Tape& tape, ad::Var pos_sim,
                                  const std::vector<ad::Var>& neg_sims,
                                  double temperature) {
    if (neg_sims.empty())
        throw ConfigError("contrastive loss needs at least one negative");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    const double inv_t = 1.0 / temperature;
    ad::Var num = tape.s_exp(tape.s_scale(pos_sim, inv_t));
    ad::Var denom = num;
    for (auto nv : neg_sims)
        denom = tape.add(denom, tape.s_exp(tape.s_scale(nv, inv_t)));
    return tape.s_neg(tape.s_log(tape.s_div(num, denom)));
}

// Multi-positive form: -log( sum_pos / (sum_pos + sum_neg) ).
inline ad::Var group_nce_from_sims(ad::Tape& tape,
                                   const std::vector<ad::Var>& pos_sims,
                                   const std::vector<ad::Var>& neg_sims,
                                   double temperature) {
    if (pos_sims.empty()) throw ConfigError("contrastive loss needs >= 1 positive");
    if (neg_sims.empty()) throw ConfigError("contrastive loss needs >= 1 negative");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    const double inv_t = 1.0 / temperature;
    ad::Var num;
    for (auto pv : pos_sims) {
        ad::Var e = tape.s_exp(tape.s_scale(pv, inv_t));
        num = num.valid() ? tape.add(num, e) : e;
    }
    ad::Var denom = num;
    for (auto nv : neg_sims)
        denom = tape.add(denom, tape.s_exp(tape.s_scale(nv, inv_t)));
    return tape.s_neg(tape.s_log(tape.s_div(num, denom)));
}

inline double motif_contrastive_loss(const std::vector<double>& h_anchor,
                                     const std::vector<double>& h_pos,
                                     const std::vector<std::vector<double>>& h_negs,
                                     double temperature = 1.0) {
    ad::Tape tape;
    auto row = [&tape](const std::vector<double>& v) {
        DenseMatrix m(1, v.size());
        for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
        return tape.leaf(std::move(m));
    };
    ad::Var a = row(h_anchor);
    ad::Var pos = tape.cosine(a, row(h_pos));
    std::vector<ad::Var> negs;
    for (const auto& n : h_negs) negs.push_back(tape.cosine(a, row(n)));
    return tape.scalar_value(info_nce_from_sims(tape, pos, negs, temperature));
}

inline double graph_contrastive_loss(
    const std::vector<double>& h_anchor,
    const std::vector<std::vector<double>>& h_pos,
    const std::vector<std::vector<double>>& h_negs, double temperature = 1.0) {
    ad::Tape tape;
    auto row = [&tape](const std::vector<double>& v) {
        DenseMatrix m(1, v.size());
        for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
        return tape.leaf(std::move(m));
    };
    ad::Var a = row(h_anchor);
    std::vector<ad::Var> pos, negs;
    for (const auto& p : h_pos) pos.push_back(tape.cosine(a, row(p)));
    for (const auto& n : h_negs) negs.push_back(tape.cosine(a, row(n)));
    return tape.scalar_value(group_nce_from_sims(tape, pos, negs, temperature));
}

inline double cross_entropy(const std::vector<double>& logits, std::size_t label) {
    ad::Tape tape;
    DenseMatrix m(1, logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) m(0, i) = logits[i];
    return tape.scalar_value(tape.cross_entropy(tape.leaf(std::move(m)), label));
}

// --- optimizer ---

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // params and grads are parallel flat lists of matrices.
    void step(std::vector<DenseMatrix*> params,
              const std::vector<DenseMatrix>& grads) {
        if (params.size() != grads.size())
            throw NumericError("adam: parameter/gradient count mismatch");
        if (m_.empty()) {
            for (auto* p : params) {
                m_.emplace_back(p->rows(), p->cols(), 0.0);
                v_.emplace_back(p->rows(), p->cols(), 0.0);
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            DenseMatrix& p = *params[i];
            const DenseMatrix& g = grads[i];
            if (!p.same_shape(g)) throw NumericError("adam: shape mismatch");
            for (std::size_t k = 0; k < p.size(); ++k) {
                double gk = g.data()[k];
                double& mk = m_[i].data()[k];
                double& vk = v_[i].data()[k];
                mk = cfg_.beta1 * mk + (1.0 - cfg_.beta1) * gk;
                vk = cfg_.beta2 * vk + (1.0 - cfg_.beta2) * gk * gk;
                const double mhat = mk / bc1;
                const double vhat = vk / bc2;
                p.data()[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    std::size_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<DenseMatrix> m_, v_;
};

// --- checkpoint io ---

namespace detail {

inline nlohmann::json matrix_to_json(const DenseMatrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = m.raw();
    return j;
}

inline DenseMatrix matrix_from_json(const nlohmann::json& j) {
    DenseMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.size()) throw DataError("checkpoint matrix size mismatch");
    m.raw() = std::move(data);
    return m;
}

}  // namespace detail

inline nlohmann::json gcn_to_json(const GcnParams& p) {
    nlohmann::json j;
    j["dropout"] = p.dropout_rate;
    j["weights"] = nlohmann::json::array();
    for (const auto& w : p.weights) j["weights"].push_back(detail::matrix_to_json(w));
    return j;
}

inline GcnParams gcn_from_json(const nlohmann::json& j) {
    GcnParams p;
    p.dropout_rate = j.at("dropout").get<double>();
    for (const auto& w : j.at("weights")) p.weights.push_back(detail::matrix_from_json(w));
    if (p.weights.empty()) throw DataError("checkpoint has no GCN layers");
    return p;
}

inline nlohmann::json head_to_json(const ClassifierHead& h) {
    nlohmann::json j;
    j["weight"] = detail::matrix_to_json(h.weight);
    j["bias"] = detail::matrix_to_json(h.bias);
    return j;
}

inline ClassifierHead head_from_json(const nlohmann::json& j) {
    ClassifierHead h;
    h.weight = detail::matrix_from_json(j.at("weight"));
    h.bias = detail::matrix_from_json(j.at("bias"));
    return h;
}

}  // namespace narx
