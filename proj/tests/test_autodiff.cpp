#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "dbg4eth/autodiff.hpp"
#include "dbg4eth/gsg.hpp"
#include "dbg4eth/ldg.hpp"

using namespace dbg4eth;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval_scalar(std::vector<Mat>& mats, const Builder& build) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(mats.size());
    for (Mat& m : mats) leaves.push_back(ad::input(tape, m));
    Var out = build(tape, leaves);
    REQUIRE(out.rows() == 1);
    REQUIRE(out.cols() == 1);
    return out.v().at(0, 0);
}

// Central finite differences against the tape gradients, every entry of
// every parameter matrix.
void check_gradients(std::vector<Mat> mats, const Builder& build, double eps = 1e-5,
                     double tol = 1e-4) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(mats.size());
    for (Mat& m : mats) leaves.push_back(ad::input(tape, m));
    Var out = build(tape, leaves);
    tape.backward(out.id);
    std::vector<Mat> analytic;
    analytic.reserve(leaves.size());
    for (Var& leaf : leaves) analytic.push_back(leaf.g());

    for (size_t mi = 0; mi < mats.size(); ++mi) {
        for (size_t e = 0; e < mats[mi].a.size(); ++e) {
            double orig = mats[mi].a[e];
            mats[mi].a[e] = orig + eps;
            double fp = eval_scalar(mats, build);
            mats[mi].a[e] = orig - eps;
            double fm = eval_scalar(mats, build);
            mats[mi].a[e] = orig;
            double fd = (fp - fm) / (2.0 * eps);
            double an = analytic[mi].a[e];
            double scale = std::max({1e-6, std::fabs(fd), std::fabs(an)});
            INFO("matrix " << mi << " entry " << e << " fd=" << fd << " analytic=" << an);
            CHECK(std::fabs(fd - an) / scale <= tol);
        }
    }
}

// Assembles GsgParamVars from harness-owned leaves, mirroring
// GsgParameters::all() ordering.
GsgParamVars vars_from_leaves(const std::vector<Var>& leaves, int layers) {
    GsgParamVars pv;
    size_t i = 0;
    pv.W_align = leaves[i++];
    for (int l = 0; l < layers; ++l) {
        pv.theta_left.push_back(leaves[i++]);
        pv.theta_right.push_back(leaves[i++]);
        pv.W_attn.push_back(leaves[i++]);
    }
    pv.theta_s_left = leaves[i++];
    pv.theta_s_right = leaves[i++];
    pv.W_read = leaves[i++];
    pv.w_head = leaves[i++];
    pv.b_head = leaves[i++];
    REQUIRE(i == leaves.size());
    return pv;
}

Mat random_mat(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat m(r, c);
    for (double& v : m.a) v = lo + (hi - lo) * rng.uniform();
    return m;
}

StaticSubgraph tiny_graph(Rng& rng, int n_nodes) {
    StaticSubgraph g;
    g.center_index = 0;
    for (int i = 0; i < n_nodes; ++i) {
        GraphNode node;
        node.address = std::string(1, static_cast<char>('a' + i));
        for (double& f : node.features) f = rng.uniform();
        g.nodes.push_back(std::move(node));
    }
    g.center = g.nodes[0].address;
    for (int i = 0; i < n_nodes; ++i)
        for (int j = 0; j < n_nodes; ++j) {
            if (i == j || rng.uniform() < 0.4) continue;
            StaticEdge e;
            e.src = i;
            e.dst = j;
            e.w = 0.1 + rng.uniform();
            e.t = 1.0 + static_cast<double>(rng.uniform_int(0, 3));
            g.edges.push_back(e);
        }
    return g;
}

}  // namespace

TEST_CASE("elementary op gradients match finite differences", "[autodiff]") {
    Rng rng(11);

    SECTION("matmul chain with nonlinearities") {
        check_gradients({random_mat(3, 4, rng), random_mat(4, 2, rng)},
                        [](Tape&, const std::vector<Var>& p) {
                            return ad::mean_all(ad::tanh_op(ad::matmul(p[0], p[1])));
                        });
    }
    SECTION("softmax rows") {
        check_gradients({random_mat(3, 5, rng)}, [](Tape&, const std::vector<Var>& p) {
            return ad::mean_all(ad::hadamard(ad::softmax_rows(p[0]), p[0]));
        });
    }
    SECTION("column max pooling") {
        check_gradients({random_mat(4, 3, rng)}, [](Tape&, const std::vector<Var>& p) {
            return ad::mean_all(ad::colmax(p[0]));
        });
    }
    SECTION("elu leaky_relu sigmoid softplus stack") {
        check_gradients({random_mat(2, 3, rng)}, [](Tape&, const std::vector<Var>& p) {
            return ad::mean_all(
                ad::softplus(ad::sigmoid_op(ad::elu(ad::leaky_relu(p[0], 0.01)))));
        });
    }
    SECTION("normalized rows and vstack") {
        check_gradients({random_mat(2, 3, rng), random_mat(2, 3, rng)},
                        [](Tape&, const std::vector<Var>& p) {
                            return ad::mean_all(ad::normalize_rows(
                                ad::vstack({p[0], p[1]})));
                        });
    }
    SECTION("rsqrt and hadamard") {
        check_gradients({random_mat(3, 3, rng, 0.5, 2.0)},
                        [](Tape& tape, const std::vector<Var>& p) {
                            Var deg = ad::matmul(p[0], ad::input(tape, Mat(3, 1, 1.0)));
                            Var scaler = ad::matmul(ad::rsqrt(deg), ad::transpose(ad::rsqrt(deg)));
                            return ad::sum_all(ad::hadamard(scaler, p[0]));
                        });
    }
}

TEST_CASE("attention encoder gradients match finite differences", "[autodiff]") {
    Rng rng(23);
    GsgConfig cfg;
    cfg.hidden = 4;
    cfg.layers = 1;
    StaticSubgraph g = tiny_graph(rng, 4);
    GsgParameters init = init_gsg_parameters(cfg, 55);

    std::vector<Mat> mats;
    for (Mat* m : init.all()) mats.push_back(*m);
    check_gradients(mats, [&](Tape& tape, const std::vector<Var>& leaves) {
        GsgParamVars pv = vars_from_leaves(leaves, cfg.layers);
        return gsg_forward(tape, pv, cfg, g).logit;
    });
}

TEST_CASE("two-layer encoder with readout gradients match finite differences", "[autodiff]") {
    Rng rng(29);
    GsgConfig cfg;
    cfg.hidden = 3;
    cfg.layers = 2;
    StaticSubgraph g = tiny_graph(rng, 5);
    GsgParameters init = init_gsg_parameters(cfg, 56);
    std::vector<Mat> mats;
    for (Mat* m : init.all()) mats.push_back(*m);
    check_gradients(mats, [&](Tape& tape, const std::vector<Var>& leaves) {
        GsgParamVars pv = vars_from_leaves(leaves, cfg.layers);
        return gsg_forward(tape, pv, cfg, g).logit;
    });
}

TEST_CASE("contrastive loss gradients match finite differences", "[autodiff]") {
    Rng rng(31);
    const int batch = 3, width = 4;
    std::vector<Mat> mats;
    for (int i = 0; i < 2 * batch; ++i) mats.push_back(random_mat(1, width, rng));
    check_gradients(mats, [&](Tape& tape, const std::vector<Var>& leaves) {
        std::vector<Var> v1(leaves.begin(), leaves.begin() + batch);
        std::vector<Var> v2(leaves.begin() + batch, leaves.end());
        return contrastive_nt_xent(tape, v1, v2, 0.5);
    });
}

TEST_CASE("graph convolution step gradients match finite differences", "[autodiff]") {
    Rng rng(37);
    const int n = 4, d = 3;
    Mat adj = random_mat(n, n, rng, 0.0, 1.0);
    for (int i = 0; i < n; ++i) adj.at(i, i) = 0.0;
    check_gradients({random_mat(n, d, rng), adj, random_mat(d, d, rng)},
                    [](Tape& tape, const std::vector<Var>& p) {
                        return ad::mean_all(ldg_ops::gcn_step_t(tape, p[0], p[1], p[2], true));
                    });
}

TEST_CASE("recurrent gate gradients match finite differences", "[autodiff]") {
    Rng rng(41);
    const int n = 3, d = 4;
    std::vector<Mat> mats{random_mat(n, d, rng), random_mat(n, d, rng)};
    for (int i = 0; i < 6; ++i) mats.push_back(random_mat(d, d, rng, -0.5, 0.5));
    check_gradients(mats, [](Tape& tape, const std::vector<Var>& p) {
        ldg_ops::GruVars w{p[2], p[3], p[4], p[5], p[6], p[7]};
        return ad::mean_all(ldg_ops::gru_step_t(tape, p[0], p[1], w));
    });
}

TEST_CASE("pooling step gradients match finite differences", "[autodiff]") {
    Rng rng(43);
    const int n = 5, d = 3, clusters = 2;
    Mat adj = random_mat(n, n, rng, 0.0, 1.0);
    for (int i = 0; i < n; ++i) adj.at(i, i) = 0.0;
    check_gradients({adj, random_mat(n, d, rng), random_mat(d, 4, rng)},
                    [&](Tape& tape, const std::vector<Var>& p) {
                        ldg_ops::PoolVarsOut out =
                            ldg_ops::diffpool_step_t(tape, p[0], p[1], p[2], clusters);
                        return ad::add(ad::mean_all(out.h_pool), ad::mean_all(out.a_pool));
                    });
}

TEST_CASE("backward accumulates through shared subexpressions", "[autodiff]") {
    // f(x) = sum(x ⊙ x) has gradient 2x; the same leaf feeds both operands.
    Mat x(2, 2);
    x.a = {1.0, -2.0, 3.0, 0.5};
    Tape tape;
    Var leaf = ad::input(tape, x);
    Var out = ad::sum_all(ad::hadamard(leaf, leaf));
    tape.backward(out.id);
    for (size_t i = 0; i < x.a.size(); ++i)
        CHECK(leaf.g().a[i] == Catch::Approx(2.0 * x.a[i]));
}
