#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "narx/matrix.hpp"

namespace narx::ad {

struct Var {
    std::size_t idx = static_cast<std::size_t>(-1);
    bool valid() const { return idx != static_cast<std::size_t>(-1); }
};

// Reverse-mode tape over matrix-valued nodes. Scalars are 1x1 matrices.
// Record a forward computation with the ops below, then call backward() on a
// scalar node; gradients accumulate into every node, leaves included.
class Tape {
public:
    Var leaf(DenseMatrix value) {
        return push(std::move(value), {}, nullptr);
    }

    Var matmul(Var a, Var b) {
        DenseMatrix c = narx::matmul(val(a), val(b));
        return push(std::move(c), {a, b}, [this](const Node& n) {
            const auto& g = n.grad;
            accumulate(n.inputs[0], narx::matmul(g, transpose(val(n.inputs[1]))));
            accumulate(n.inputs[1], narx::matmul(transpose(val(n.inputs[0])), g));
        });
    }

    Var add(Var a, Var b) {
        DenseMatrix c = val(a);
        add_inplace(c, val(b));
        return push(std::move(c), {a, b}, [this](const Node& n) {
            accumulate(n.inputs[0], n.grad);
            accumulate(n.inputs[1], n.grad);
        });
    }

    // Row vector `b` (1 x cols) added to every row of `a`.
    Var add_rowvec(Var a, Var b) {
        DenseMatrix c = val(a);
        const DenseMatrix& r = val(b);
        if (r.rows() != 1 || r.cols() != c.cols())
            throw NumericError("add_rowvec: shape mismatch");
        for (std::size_t i = 0; i < c.rows(); ++i)
            for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += r(0, j);
        return push(std::move(c), {a, b}, [this](const Node& n) {
            accumulate(n.inputs[0], n.grad);
            DenseMatrix gb(1, n.grad.cols(), 0.0);
            for (std::size_t i = 0; i < n.grad.rows(); ++i)
                for (std::size_t j = 0; j < n.grad.cols(); ++j)
                    gb(0, j) += n.grad(i, j);
            accumulate(n.inputs[1], gb);
        });
    }

    Var relu(Var a) {
        DenseMatrix c = val(a);
        for (std::size_t i = 0; i < c.size(); ++i)
            if (c.data()[i] < 0.0) c.data()[i] = 0.0;
        return push(std::move(c), {a}, [this](const Node& n) {
            DenseMatrix g = n.grad;
            const DenseMatrix& x = val(n.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.data()[i] <= 0.0) g.data()[i] = 0.0;
            accumulate(n.inputs[0], g);
        });
    }

    // Elementwise product with a constant mask (dropout).
    Var hadamard_const(Var a, DenseMatrix mask) {
        DenseMatrix c = val(a);
        if (!c.same_shape(mask)) throw NumericError("hadamard: shape mismatch");
        for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= mask.data()[i];
        auto m = std::make_shared<DenseMatrix>(std::move(mask));
        return push(std::move(c), {a}, [this, m](const Node& n) {
            DenseMatrix g = n.grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                g.data()[i] *= m->data()[i];
            accumulate(n.inputs[0], g);
        });
    }

    // Column-wise mean of rows: (r x c) -> (1 x c). Readout.
    Var row_mean(Var a) {
        const DenseMatrix& x = val(a);
        DenseMatrix c(1, x.cols(), 0.0);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) c(0, j) += x(i, j);
        const double inv = x.rows() ? 1.0 / static_cast<double>(x.rows()) : 0.0;
        scale_inplace(c, inv);
        return push(std::move(c), {a}, [this, inv](const Node& n) {
            const DenseMatrix& x0 = val(n.inputs[0]);
            DenseMatrix g(x0.rows(), x0.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    g(i, j) = n.grad(0, j) * inv;
            accumulate(n.inputs[0], g);
        });
    }

    // Cosine similarity of two row vectors -> scalar. Zero-vector inputs give
    // 0 with zero gradient.
    Var cosine(Var a, Var b) {
        const DenseMatrix& u = val(a);
        const DenseMatrix& v = val(b);
        if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols())
            throw NumericError("cosine: expects row vectors of equal dim");
        const double nu = norm2(u.raw());
        const double nv = norm2(v.raw());
        double c = 0.0;
        if (nu > 0.0 && nv > 0.0) c = dot(u.raw(), v.raw()) / (nu * nv);
        DenseMatrix out(1, 1);
        out(0, 0) = c;
        return push(std::move(out), {a, b}, [this, nu, nv, c](const Node& n) {
            if (nu == 0.0 || nv == 0.0) return;
            const double g = n.grad(0, 0);
            const DenseMatrix& u0 = val(n.inputs[0]);
            const DenseMatrix& v0 = val(n.inputs[1]);
            DenseMatrix gu(1, u0.cols()), gv(1, v0.cols());
            for (std::size_t j = 0; j < u0.cols(); ++j) {
                gu(0, j) = g * (v0(0, j) / (nu * nv) - c * u0(0, j) / (nu * nu));
                gv(0, j) = g * (u0(0, j) / (nu * nv) - c * v0(0, j) / (nv * nv));
            }
            accumulate(n.inputs[0], gu);
            accumulate(n.inputs[1], gv);
        });
    }

    // Row-wise L2 normalization of a 1xd vector; a zero vector passes through
    // unchanged with zero gradient.
    Var l2_normalize(Var a) {
        const DenseMatrix& u = val(a);
        if (u.rows() != 1)
            throw NumericError("l2_normalize: expects a row vector");
        const double nu = norm2(u.raw());
        DenseMatrix out(1, u.cols(), 0.0);
        if (nu > 0.0)
            for (std::size_t j = 0; j < u.cols(); ++j) out(0, j) = u(0, j) / nu;
        return push(std::move(out), {a}, [this, nu](const Node& n) {
            if (nu == 0.0) return;
            const DenseMatrix& x = val(n.inputs[0]);
            double gx = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j)
                gx += n.grad(0, j) * x(0, j);
            gx /= (nu * nu);
            DenseMatrix g(1, x.cols());
            for (std::size_t j = 0; j < x.cols(); ++j)
                g(0, j) = (n.grad(0, j) - gx * x(0, j)) / nu;
            accumulate(n.inputs[0], g);
        });
    }

    // --- scalar (1x1) helpers ---

    Var scalar(double v) {
        DenseMatrix m(1, 1);
        m(0, 0) = v;
        return leaf(std::move(m));
    }

    Var s_scale(Var a, double k) {
        DenseMatrix c = val(a);
        scale_inplace(c, k);
        return push(std::move(c), {a}, [this, k](const Node& n) {
            DenseMatrix g = n.grad;
            scale_inplace(g, k);
            accumulate(n.inputs[0], g);
        });
    }

    Var s_exp(Var a) {
        double v = std::exp(scalar_val(a));
        return push(scalar_mat(v), {a}, [this, v](const Node& n) {
            accumulate_scalar(n.inputs[0], n.grad(0, 0) * v);
        });
    }

    Var s_log(Var a) {
        double x = scalar_val(a);
        return push(scalar_mat(std::log(x)), {a}, [this, x](const Node& n) {
            accumulate_scalar(n.inputs[0], n.grad(0, 0) / x);
        });
    }

    Var s_neg(Var a) { return s_scale(a, -1.0); }

    Var s_div(Var a, Var b) {
        double x = scalar_val(a), y = scalar_val(b);
        return push(scalar_mat(x / y), {a, b}, [this, x, y](const Node& n) {
            const double g = n.grad(0, 0);
            accumulate_scalar(n.inputs[0], g / y);
            accumulate_scalar(n.inputs[1], -g * x / (y * y));
        });
    }

    // Cross-entropy of a 1 x C logits row against a class id, with the
    // softmax-minus-onehot backward rule.
    Var cross_entropy(Var logits, std::size_t label) {
        const DenseMatrix& z = val(logits);
        if (z.rows() != 1) throw NumericError("cross_entropy: logits must be 1 x C");
        if (label >= z.cols())
            throw NumericError("cross_entropy: label out of range");
        double mx = z(0, 0);
        for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(0, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) sum += std::exp(z(0, j) - mx);
        const double lse = mx + std::log(sum);
        const double lossv = lse - z(0, label);
        return push(scalar_mat(lossv), {logits},
                    [this, label, mx, sum, lse](const Node& n) {
                        const double g = n.grad(0, 0);
                        const DenseMatrix& z0 = val(n.inputs[0]);
                        DenseMatrix gz(1, z0.cols());
                        for (std::size_t j = 0; j < z0.cols(); ++j) {
                            double sm = std::exp(z0(0, j) - mx) / sum;
                            gz(0, j) = g * (sm - (j == label ? 1.0 : 0.0));
                        }
                        (void)lse;
                        accumulate(n.inputs[0], gz);
                    });
    }

    void backward(Var loss) {
        Node& l = nodes_[loss.idx];
        if (l.val.rows() != 1 || l.val.cols() != 1)
            throw NumericError("backward: loss must be scalar");
        for (auto& n : nodes_) n.grad = DenseMatrix();
        l.grad = scalar_mat(1.0);
        for (std::size_t i = loss.idx + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.back && n.grad.size() > 0) n.back(n);
        }
    }

    const DenseMatrix& value(Var v) const { return nodes_[v.idx].val; }

    // Zero matrix if the node received no gradient flow.
    DenseMatrix gradient(Var v) const {
        const Node& n = nodes_[v.idx];
        if (n.grad.size() == 0) return DenseMatrix(n.val.rows(), n.val.cols(), 0.0);
        return n.grad;
    }

    double scalar_value(Var v) const { return nodes_[v.idx].val(0, 0); }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        DenseMatrix val;
        DenseMatrix grad;
        std::vector<Var> inputs;
        std::function<void(const Node&)> back;
    };

    static DenseMatrix scalar_mat(double v) {
        DenseMatrix m(1, 1);
        m(0, 0) = v;
        return m;
    }

    double scalar_val(Var a) const { return nodes_[a.idx].val(0, 0); }

    const DenseMatrix& val(Var v) const { return nodes_[v.idx].val; }

    void accumulate(Var v, const DenseMatrix& g) {
        Node& n = nodes_[v.idx];
        if (n.grad.size() == 0)
            n.grad = g;
        else
            add_inplace(n.grad, g);
    }

    void accumulate_scalar(Var v, double g) {
        Node& n = nodes_[v.idx];
        if (n.grad.size() == 0) n.grad = DenseMatrix(1, 1, 0.0);
        n.grad(0, 0) += g;
    }

    Var push(DenseMatrix val, std::vector<Var> inputs,
             std::function<void(const Node&)> back) {
        nodes_.push_back(Node{std::move(val), {}, std::move(inputs), std::move(back)});
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

}  // namespace narx::ad
