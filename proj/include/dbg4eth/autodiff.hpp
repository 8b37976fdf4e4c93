#pragma once

#include <cassert>
#include <cmath>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "dbg4eth/matrix.hpp"

namespace dbg4eth {

// Reverse-mode tape over Mat. Nodes are appended in evaluation order, so
// running closures in reverse index order is a valid topological sweep.
// A Tape must stay at a fixed address while its Vars are alive.
class Tape {
public:
    int add(Mat v) {
        nodes_.push_back(Node{std::move(v), Mat(), {}});
        return static_cast<int>(nodes_.size()) - 1;
    }

    void set_back(int id, std::function<void()> f) { nodes_[id].back = std::move(f); }

    Mat& val(int id) { return nodes_[id].v; }
    Mat& grad(int id) { return nodes_[id].g; }

    void backward(int root) {
        assert(val(root).rows == 1 && val(root).cols == 1);
        for (auto& n : nodes_) n.g = Mat::zeros(n.v.rows, n.v.cols);
        nodes_[root].g.at(0, 0) = 1.0;
        for (int i = root; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back();
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat v;
        Mat g;
        std::function<void()> back;
    };
    std::deque<Node> nodes_;
};

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& v() const { return tape->val(id); }
    const Mat& g() const { return tape->grad(id); }
    int rows() const { return v().rows; }
    int cols() const { return v().cols; }
};

namespace ad {

inline void accum(Mat& dst, const Mat& src) {
    assert(dst.same_shape(src));
    for (size_t i = 0; i < dst.size(); ++i) dst.a[i] += src.a[i];
}

inline Var input(Tape& t, Mat m) { return Var{&t, t.add(std::move(m))}; }

inline Var matmul(Var x, Var y) {
    Tape& t = *x.tape;
    int id = t.add(dbg4eth::matmul(x.v(), y.v()));
    t.set_back(id, [&t, id, xi = x.id, yi = y.id] {
        const Mat& go = t.grad(id);
        accum(t.grad(xi), dbg4eth::matmul(go, dbg4eth::transpose(t.val(yi))));
        accum(t.grad(yi), dbg4eth::matmul(dbg4eth::transpose(t.val(xi)), go));
    });
    return {&t, id};
}

inline Var transpose(Var x) {
    Tape& t = *x.tape;
    int id = t.add(dbg4eth::transpose(x.v()));
    t.set_back(id, [&t, id, xi = x.id] { accum(t.grad(xi), dbg4eth::transpose(t.grad(id))); });
    return {&t, id};
}

inline Var add(Var x, Var y) {
    Tape& t = *x.tape;
    int id = t.add(x.v() + y.v());
    t.set_back(id, [&t, id, xi = x.id, yi = y.id] {
        accum(t.grad(xi), t.grad(id));
        accum(t.grad(yi), t.grad(id));
    });
    return {&t, id};
}

inline Var sub(Var x, Var y) {
    Tape& t = *x.tape;
    int id = t.add(x.v() - y.v());
    t.set_back(id, [&t, id, xi = x.id, yi = y.id] {
        accum(t.grad(xi), t.grad(id));
        const Mat& go = t.grad(id);
        Mat& gy = t.grad(yi);
        for (size_t i = 0; i < gy.size(); ++i) gy.a[i] -= go.a[i];
    });
    return {&t, id};
}

inline Var scale(Var x, double s) {
    Tape& t = *x.tape;
    int id = t.add(x.v() * s);
    t.set_back(id, [&t, id, xi = x.id, s] { accum(t.grad(xi), t.grad(id) * s); });
    return {&t, id};
}

inline Var hadamard(Var x, Var y) {
    Tape& t = *x.tape;
    int id = t.add(dbg4eth::hadamard(x.v(), y.v()));
    t.set_back(id, [&t, id, xi = x.id, yi = y.id] {
        accum(t.grad(xi), dbg4eth::hadamard(t.grad(id), t.val(yi)));
        accum(t.grad(yi), dbg4eth::hadamard(t.grad(id), t.val(xi)));
    });
    return {&t, id};
}

// x + c where c carries no gradient (masks, labels, fixed adjacency).
inline Var add_const(Var x, const Mat& c) {
    Tape& t = *x.tape;
    int id = t.add(x.v() + c);
    t.set_back(id, [&t, id, xi = x.id] { accum(t.grad(xi), t.grad(id)); });
    return {&t, id};
}

inline Var mul_const(Var x, const Mat& c) {
    Tape& t = *x.tape;
    Mat cc = c;
    int id = t.add(dbg4eth::hadamard(x.v(), cc));
    t.set_back(id, [&t, id, xi = x.id, cc = std::move(cc)] {
        accum(t.grad(xi), dbg4eth::hadamard(t.grad(id), cc));
    });
    return {&t, id};
}

inline Var matmul_const_left(const Mat& c, Var x) {
    Tape& t = *x.tape;
    Mat cc = c;
    int id = t.add(dbg4eth::matmul(cc, x.v()));
    t.set_back(id, [&t, id, xi = x.id, cc = std::move(cc)] {
        accum(t.grad(xi), dbg4eth::matmul(dbg4eth::transpose(cc), t.grad(id)));
    });
    return {&t, id};
}

// z_ij = u_i + v_j from column vectors u (Nx1) and v (Mx1).
inline Var broadcast_outer_add(Var u, Var v) {
    Tape& t = *u.tape;
    assert(u.cols() == 1 && v.cols() == 1);
    int n = u.rows(), m = v.rows();
    Mat out(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(i, j) = u.v().at(i, 0) + v.v().at(j, 0);
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, ui = u.id, vi = v.id, n, m] {
        const Mat& go = t.grad(id);
        Mat& gu = t.grad(ui);
        Mat& gv = t.grad(vi);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                gu.at(i, 0) += go.at(i, j);
                gv.at(j, 0) += go.at(i, j);
            }
    });
    return {&t, id};
}

// X (NxC) + broadcast row r (1xC).
inline Var add_rowvec(Var x, Var r) {
    Tape& t = *x.tape;
    assert(r.rows() == 1 && r.cols() == x.cols());
    Mat out = x.v();
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += r.v().at(0, j);
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, ri = r.id] {
        const Mat& go = t.grad(id);
        accum(t.grad(xi), go);
        Mat& gr = t.grad(ri);
        for (int i = 0; i < go.rows; ++i)
            for (int j = 0; j < go.cols; ++j) gr.at(0, j) += go.at(i, j);
    });
    return {&t, id};
}

namespace detail {

template <typename F, typename DF>
Var elementwise(Var x, F f, DF df) {
    Tape& t = *x.tape;
    Mat out = x.v();
    for (double& v : out.a) v = f(v);
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, df] {
        const Mat& go = t.grad(id);
        const Mat& xv = t.val(xi);
        const Mat& yv = t.val(id);
        Mat& gx = t.grad(xi);
        for (size_t i = 0; i < gx.size(); ++i) gx.a[i] += go.a[i] * df(xv.a[i], yv.a[i]);
    });
    return {&t, id};
}

}  // namespace detail

inline Var leaky_relu(Var x, double slope = 0.01) {
    return detail::elementwise(
        x, [slope](double v) { return v > 0 ? v : slope * v; },
        [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

inline Var relu(Var x) {
    return detail::elementwise(
        x, [](double v) { return v > 0 ? v : 0.0; },
        [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Var elu(Var x) {
    return detail::elementwise(
        x, [](double v) { return v > 0 ? v : std::expm1(v); },
        [](double v, double y) { return v > 0 ? 1.0 : y + 1.0; });
}

inline Var sigmoid_op(Var x) {
    return detail::elementwise(
        x, [](double v) { return dbg4eth::sigmoid(v); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh_op(Var x) {
    return detail::elementwise(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var softplus(Var x) {
    return detail::elementwise(
        x,
        [](double v) { return (v > 0 ? v : 0.0) + std::log1p(std::exp(-std::fabs(v))); },
        [](double v, double) { return dbg4eth::sigmoid(v); });
}

inline Var log_op(Var x) {
    return detail::elementwise(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Var rsqrt(Var x) {
    return detail::elementwise(
        x, [](double v) { return 1.0 / std::sqrt(v); },
        [](double, double y) { return -0.5 * y * y * y; });
}

inline Var softmax_rows(Var x) {
    Tape& t = *x.tape;
    Mat out = x.v();
    for (int i = 0; i < out.rows; ++i) {
        double mx = -1e300;
        for (int j = 0; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (int j = 0; j < out.cols; ++j) out.at(i, j) /= sum;
    }
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id] {
        const Mat& y = t.val(id);
        const Mat& go = t.grad(id);
        Mat& gx = t.grad(xi);
        for (int i = 0; i < y.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols; ++j) dot += go.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j) gx.at(i, j) += y.at(i, j) * (go.at(i, j) - dot);
        }
    });
    return {&t, id};
}

// Column-wise max over rows: (NxC) -> (1xC). Gradient routes to the first
// argmax row per column.
inline Var colmax(Var x) {
    Tape& t = *x.tape;
    const Mat& xv = x.v();
    Mat out(1, xv.cols);
    std::vector<int> argmax(xv.cols, 0);
    for (int j = 0; j < xv.cols; ++j) {
        double best = xv.at(0, j);
        for (int i = 1; i < xv.rows; ++i)
            if (xv.at(i, j) > best) {
                best = xv.at(i, j);
                argmax[j] = i;
            }
        out.at(0, j) = best;
    }
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, argmax = std::move(argmax)] {
        const Mat& go = t.grad(id);
        Mat& gx = t.grad(xi);
        for (int j = 0; j < go.cols; ++j) gx.at(argmax[j], j) += go.at(0, j);
    });
    return {&t, id};
}

inline Var vstack(const std::vector<Var>& xs) {
    assert(!xs.empty());
    Tape& t = *xs[0].tape;
    int cols = xs[0].cols();
    int rows = 0;
    for (const Var& x : xs) {
        assert(x.cols() == cols);
        rows += x.rows();
    }
    Mat out(rows, cols);
    std::vector<int> ids;
    std::vector<int> offsets;
    int off = 0;
    for (const Var& x : xs) {
        ids.push_back(x.id);
        offsets.push_back(off);
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < cols; ++j) out.at(off + i, j) = x.v().at(i, j);
        off += x.rows();
    }
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, ids = std::move(ids), offsets = std::move(offsets), cols] {
        const Mat& go = t.grad(id);
        for (size_t k = 0; k < ids.size(); ++k) {
            Mat& gx = t.grad(ids[k]);
            for (int i = 0; i < gx.rows; ++i)
                for (int j = 0; j < cols; ++j) gx.at(i, j) += go.at(offsets[k] + i, j);
        }
    });
    return {&t, id};
}

// Leading-column slice: (NxC) -> (Nxc).
inline Var first_cols(Var x, int c) {
    Tape& t = *x.tape;
    assert(c >= 1 && c <= x.cols());
    const Mat& xv = x.v();
    Mat out(xv.rows, c);
    for (int i = 0; i < xv.rows; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) = xv.at(i, j);
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, c] {
        const Mat& go = t.grad(id);
        Mat& gx = t.grad(xi);
        for (int i = 0; i < go.rows; ++i)
            for (int j = 0; j < c; ++j) gx.at(i, j) += go.at(i, j);
    });
    return {&t, id};
}

inline Var diag(Var x) {
    Tape& t = *x.tape;
    assert(x.rows() == x.cols());
    int n = x.rows();
    Mat out(n, 1);
    for (int i = 0; i < n; ++i) out.at(i, 0) = x.v().at(i, i);
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, n] {
        const Mat& go = t.grad(id);
        Mat& gx = t.grad(xi);
        for (int i = 0; i < n; ++i) gx.at(i, i) += go.at(i, 0);
    });
    return {&t, id};
}

inline Var sum_all(Var x) {
    Tape& t = *x.tape;
    double s = 0.0;
    for (double v : x.v().a) s += v;
    Mat out(1, 1);
    out.at(0, 0) = s;
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id] {
        double go = t.grad(id).at(0, 0);
        Mat& gx = t.grad(xi);
        for (double& v : gx.a) v += go;
    });
    return {&t, id};
}

inline Var mean_all(Var x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.v().size()));
}

// Row-wise L2 normalization with a small floor to keep zero rows finite.
inline Var normalize_rows(Var x) {
    Tape& t = *x.tape;
    const Mat& xv = x.v();
    Mat out = xv;
    std::vector<double> norms(xv.rows);
    for (int i = 0; i < xv.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < xv.cols; ++j) s += xv.at(i, j) * xv.at(i, j);
        norms[i] = std::max(std::sqrt(s), 1e-12);
        for (int j = 0; j < xv.cols; ++j) out.at(i, j) /= norms[i];
    }
    int id = t.add(std::move(out));
    t.set_back(id, [&t, id, xi = x.id, norms = std::move(norms)] {
        const Mat& y = t.val(id);
        const Mat& go = t.grad(id);
        Mat& gx = t.grad(xi);
        for (int i = 0; i < y.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols; ++j) dot += go.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j)
                gx.at(i, j) += (go.at(i, j) - dot * y.at(i, j)) / norms[i];
        }
    });
    return {&t, id};
}

}  // namespace ad

// Adam with the usual bias correction; operates in-place on a parameter set.
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Mat*> params, const std::vector<Mat>& grads) {
        if (m_.empty()) {
            for (Mat* p : params) {
                m_.emplace_back(Mat::zeros(p->rows, p->cols));
                v_.emplace_back(Mat::zeros(p->rows, p->cols));
            }
        }
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t k = 0; k < params.size(); ++k) {
            Mat& p = *params[k];
            const Mat& g = grads[k];
            for (size_t i = 0; i < p.size(); ++i) {
                m_[k].a[i] = beta1_ * m_[k].a[i] + (1.0 - beta1_) * g.a[i];
                v_[k].a[i] = beta2_ * v_[k].a[i] + (1.0 - beta2_) * g.a[i] * g.a[i];
                double mhat = m_[k].a[i] / bc1;
                double vhat = v_[k].a[i] / bc2;
                p.a[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Mat> m_, v_;
};

}  // namespace dbg4eth
