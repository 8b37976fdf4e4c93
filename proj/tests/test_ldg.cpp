#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dbg4eth/ldg.hpp"

using namespace dbg4eth;

namespace {

DynamicGraphSequence chain_sequence(int n_nodes, int T, uint64_t seed) {
    Rng rng(seed);
    DynamicGraphSequence g;
    g.center = "a";
    g.center_index = 0;
    for (int i = 0; i < n_nodes; ++i) {
        GraphNode node;
        node.address = std::string(1, static_cast<char>('a' + i % 26)) + std::to_string(i);
        for (double& f : node.features) f = rng.uniform();
        g.nodes.push_back(std::move(node));
    }
    g.slices.resize(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
        for (int i = 0; i + 1 < n_nodes; ++i) {
            if (rng.uniform() < 0.4) continue;
            SliceEdge e;
            e.src = i;
            e.dst = i + 1;
            e.w = 0.1 + rng.uniform();
            g.slices[static_cast<size_t>(t)].push_back(e);
        }
    return g;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("adjacency normalization matches the hand-computed path graph", "[ldg]") {
    // Path 0-1-2, unit weights: degrees of A + A^T + I are [2, 3, 2].
    Mat a = Mat::zeros(3, 3);
    a.at(0, 1) = 1.0;
    a.at(1, 2) = 1.0;
    Mat got = normalized_adjacency(a);
    CHECK(got.at(0, 0) == Catch::Approx(0.5));
    CHECK(got.at(1, 1) == Catch::Approx(1.0 / 3.0));
    CHECK(got.at(2, 2) == Catch::Approx(0.5));
    CHECK(got.at(0, 1) == Catch::Approx(1.0 / std::sqrt(6.0)));
    CHECK(got.at(1, 0) == Catch::Approx(1.0 / std::sqrt(6.0)));
    CHECK(got.at(1, 2) == Catch::Approx(1.0 / std::sqrt(6.0)));
    CHECK(got.at(0, 2) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("graph convolution over an empty slice is the identity", "[ldg]") {
    Mat h(2, 3);
    h.a = {1.0, -2.0, 3.0, 0.5, 0.25, -0.125};
    Mat a = Mat::zeros(2, 2);
    Mat w = Mat::identity(3);
    Mat u = gcn_step(h, a, w, /*relu_activation=*/false);
    for (size_t i = 0; i < h.size(); ++i) CHECK(u.a[i] == Catch::Approx(h.a[i]));
}

TEST_CASE("graph convolution keeps symmetric states symmetric", "[ldg]") {
    Mat h(2, 2);
    h.a = {0.7, -0.3, 0.7, -0.3};
    Mat a = Mat::zeros(2, 2);
    a.at(0, 1) = 1.0;
    Mat w(2, 2);
    w.a = {0.5, 0.1, -0.2, 0.9};
    Mat u = gcn_step(h, a, w);
    CHECK(u.at(0, 0) == Catch::Approx(u.at(1, 0)));
    CHECK(u.at(0, 1) == Catch::Approx(u.at(1, 1)));
}

TEST_CASE("recurrent gate closed form with zero weights", "[ldg]") {
    const int n = 2, d = 3;
    GruWeights w;
    w.W_u = w.V_u = w.W_r = w.V_r = w.W_h = w.V_h = Mat::zeros(d, d);
    Mat u_in(n, d, 0.8);
    Mat h_prev(n, d);
    h_prev.a = {1.0, 2.0, -3.0, 4.0, -5.0, 6.0};
    Mat h = gru_step(u_in, h_prev, w);
    for (size_t i = 0; i < h.size(); ++i) CHECK(h.a[i] == Catch::Approx(0.5 * h_prev.a[i]));
}

TEST_CASE("recurrent gate boundary identities", "[ldg]") {
    Mat h_prev(1, 3);
    h_prev.a = {0.3, -0.7, 1.1};
    Mat h_tilde(1, 3);
    h_tilde.a = {-0.2, 0.5, 0.9};
    Mat u0 = Mat::zeros(1, 3);
    Mat u1(1, 3, 1.0);
    Mat keep = gru_combine(u0, h_prev, h_tilde);
    Mat swap = gru_combine(u1, h_prev, h_tilde);
    for (size_t i = 0; i < h_prev.size(); ++i) {
        CHECK(keep.a[i] == h_prev.a[i]);
        CHECK(swap.a[i] == h_tilde.a[i]);
    }
}

TEST_CASE("recurrent gate matches a scalar-by-scalar recomputation", "[ldg]") {
    Rng rng(67);
    const int n = 2, d = 3;
    auto rnd = [&](int r, int c) {
        Mat m(r, c);
        for (double& v : m.a) v = 2.0 * rng.uniform() - 1.0;
        return m;
    };
    GruWeights w;
    w.W_u = rnd(d, d);
    w.V_u = rnd(d, d);
    w.W_r = rnd(d, d);
    w.V_r = rnd(d, d);
    w.W_h = rnd(d, d);
    w.V_h = rnd(d, d);
    Mat u_in = rnd(n, d), h_prev = rnd(n, d);
    Mat got = gru_step(u_in, h_prev, w);

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            double zu = 0, zr = 0;
            for (int k = 0; k < d; ++k) {
                zu += u_in.at(i, k) * w.W_u.at(k, j) + h_prev.at(i, k) * w.V_u.at(k, j);
                zr += u_in.at(i, k) * w.W_r.at(k, j) + h_prev.at(i, k) * w.V_r.at(k, j);
            }
            double u = sigmoid_ref(zu);
            // h_tilde needs the full reset row, recompute it element-wise.
            double zh = 0;
            for (int k = 0; k < d; ++k) {
                double zr_k = 0;
                for (int k2 = 0; k2 < d; ++k2)
                    zr_k += u_in.at(i, k2) * w.W_r.at(k2, k) + h_prev.at(i, k2) * w.V_r.at(k2, k);
                double r_k = sigmoid_ref(zr_k);
                zh += u_in.at(i, k) * w.W_h.at(k, j) + r_k * h_prev.at(i, k) * w.V_h.at(k, j);
            }
            (void)zr;
            double h_tilde = std::tanh(zh);
            double want = (1.0 - u) * h_prev.at(i, j) + u * h_tilde;
            CHECK(got.at(i, j) == Catch::Approx(want).epsilon(1e-9));
        }
}

TEST_CASE("single-cluster pooling sums states and adjacency", "[ldg]") {
    Rng rng(71);
    const int n = 4, d = 3;
    Mat h(n, d), a(n, n), w(d, 5);
    for (double& v : h.a) v = rng.uniform();
    for (double& v : a.a) v = rng.uniform();
    for (double& v : w.a) v = rng.uniform();
    DiffPoolResult out = diffpool_step(a, h, w, 1);
    REQUIRE(out.assignment.rows == n);
    REQUIRE(out.assignment.cols == 1);
    for (int i = 0; i < n; ++i) CHECK(out.assignment.at(i, 0) == Catch::Approx(1.0));
    for (int j = 0; j < d; ++j) {
        double want = 0;
        for (int i = 0; i < n; ++i) want += h.at(i, j);
        CHECK(out.h_pool.at(0, j) == Catch::Approx(want));
    }
    double a_total = 0;
    for (double v : a.a) a_total += v;
    CHECK(out.a_pool.at(0, 0) == Catch::Approx(a_total));
}

TEST_CASE("pooling assignment rows are probability vectors", "[ldg]") {
    Rng rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_int(0, 4));
        int d = 2 + static_cast<int>(rng.uniform_int(0, 2));
        int clusters = 1 + static_cast<int>(rng.uniform_int(0, 2));
        Mat h(n, d), a(n, n), w(d, 4);
        for (double& v : h.a) v = 2.0 * rng.uniform() - 1.0;
        for (double& v : a.a) v = rng.uniform();
        for (double& v : w.a) v = 2.0 * rng.uniform() - 1.0;
        DiffPoolResult out = diffpool_step(a, h, w, clusters);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int c = 0; c < clusters; ++c) s += out.assignment.at(i, c);
            CHECK(s == Catch::Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("pooled products match a dense matrix oracle", "[ldg]") {
    Rng rng(79);
    const int n = 4, d = 3, clusters = 2;
    Mat h(n, d), a(n, n), w(d, 4);
    for (double& v : h.a) v = rng.uniform();
    for (double& v : a.a) v = rng.uniform();
    for (double& v : w.a) v = rng.uniform();
    DiffPoolResult out = diffpool_step(a, h, w, clusters);
    const Mat& m = out.assignment;
    for (int c = 0; c < clusters; ++c)
        for (int j = 0; j < d; ++j) {
            double want = 0;
            for (int i = 0; i < n; ++i) want += m.at(i, c) * h.at(i, j);
            CHECK(out.h_pool.at(c, j) == Catch::Approx(want).epsilon(1e-9));
        }
    for (int c1 = 0; c1 < clusters; ++c1)
        for (int c2 = 0; c2 < clusters; ++c2) {
            double want = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) want += m.at(i, c1) * a.at(i, j) * m.at(j, c2);
            CHECK(out.a_pool.at(c1, c2) == Catch::Approx(want).epsilon(1e-9));
        }
}

TEST_CASE("cluster counts exceeding capacity are rejected", "[ldg]") {
    Mat h(3, 2), a(3, 3), w(2, 2);
    CHECK_THROWS_AS(diffpool_step(a, h, w, 3), ValidationError);
    CHECK_THROWS_AS(diffpool_step(a, h, w, 0), ValidationError);
}

TEST_CASE("temporal readout weights slices by softmaxed coefficients", "[ldg]") {
    std::vector<Mat> pooled;
    Mat p1 = Mat::row({1.0, 2.0});
    Mat p2 = Mat::row({3.0, -1.0});
    Mat p3 = Mat::row({0.0, 5.0});
    pooled = {p1, p2, p3};

    // Uniform coefficients: the readout is the slice mean.
    Mat alpha0 = Mat::zeros(3, 1);
    std::vector<double> weights;
    Mat mean = temporal_readout(pooled, alpha0, &weights);
    CHECK(mean.at(0, 0) == Catch::Approx(4.0 / 3.0));
    CHECK(mean.at(0, 1) == Catch::Approx(2.0));
    double wsum = 0;
    for (double w : weights) {
        CHECK(w == Catch::Approx(1.0 / 3.0));
        wsum += w;
    }
    CHECK(wsum == Catch::Approx(1.0).margin(1e-9));

    // Heavily concentrated coefficients pick out one slice.
    Mat alpha1 = Mat::zeros(3, 1);
    alpha1.at(2, 0) = 50.0;
    Mat picked = temporal_readout(pooled, alpha1);
    CHECK(picked.at(0, 0) == Catch::Approx(0.0).margin(1e-9));
    CHECK(picked.at(0, 1) == Catch::Approx(5.0).margin(1e-9));

    // Hand-set weights [0.2, 0.3, 0.5] via logits ln(w).
    Mat alpha2(3, 1);
    alpha2.a = {std::log(0.2), std::log(0.3), std::log(0.5)};
    Mat mixed = temporal_readout(pooled, alpha2);
    CHECK(mixed.at(0, 0) == Catch::Approx(0.2 * 1.0 + 0.3 * 3.0 + 0.5 * 0.0).epsilon(1e-9));
    CHECK(mixed.at(0, 1) == Catch::Approx(0.2 * 2.0 - 0.3 * 1.0 + 0.5 * 5.0).epsilon(1e-9));
}

TEST_CASE("branch output is nonnegative and zero under a zero head", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 4;
    DynamicGraphSequence g = chain_sequence(5, 3, 81);
    LdgParameters p = init_ldg_parameters(cfg, 3, 5);
    p.theta_g = Mat::zeros(cfg.hidden, 1);
    p.b_g = Mat::zeros(1, 1);
    LdgModel zero_head(cfg, p, true);
    CHECK(zero_head.predict(g) == 0.0);

    for (uint64_t s = 0; s < 10; ++s) {
        LdgModel m(cfg, init_ldg_parameters(cfg, 3, s), true);
        CHECK(m.predict(chain_sequence(4, 3, s + 40)) >= 0.0);
    }
}

TEST_CASE("prediction requires a fitted sequence model", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 4;
    LdgModel model(cfg, init_ldg_parameters(cfg, 3, 1), false);
    CHECK_THROWS_AS(model.predict(chain_sequence(4, 3, 1)), NotFittedError);
}

TEST_CASE("pooling trace reports the documented cluster schedule", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 4;
    cfg.pool_rate = 0.1;
    cfg.pool_levels = 2;
    DynamicGraphSequence g = chain_sequence(25, 3, 83);
    LdgModel model(cfg, init_ldg_parameters(cfg, 3, 7), true);
    LdgTrace trace;
    model.predict(g, &trace);
    REQUIRE(trace.cluster_counts.size() == 3);
    for (const auto& per_slice : trace.cluster_counts) {
        REQUIRE(per_slice.size() == 2);
        CHECK(per_slice[0] == 2);  // max(1, floor(0.1 * 25))
        CHECK(per_slice[1] == 1);
    }
    for (const auto& slice_sums : trace.assignment_row_sums)
        for (const auto& level_sums : slice_sums)
            for (double s : level_sums) CHECK(s == Catch::Approx(1.0).margin(1e-6));
    double wsum = 0;
    for (double w : trace.temporal_weights) wsum += w;
    CHECK(wsum == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("sequence prediction is invariant to consistent relabeling", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 5;
    DynamicGraphSequence g = chain_sequence(6, 4, 89);
    LdgParameters p = init_ldg_parameters(cfg, 4, 11);
    LdgModel model(cfg, p, true);

    DynamicGraphSequence r = g;
    int n = static_cast<int>(g.nodes.size());
    for (int i = 0; i < n; ++i) r.nodes[static_cast<size_t>(n - 1 - i)] = g.nodes[static_cast<size_t>(i)];
    r.center_index = n - 1 - g.center_index;
    for (size_t t = 0; t < g.slices.size(); ++t)
        for (size_t e = 0; e < g.slices[t].size(); ++e) {
            r.slices[t][e].src = n - 1 - g.slices[t][e].src;
            r.slices[t][e].dst = n - 1 - g.slices[t][e].dst;
        }
    CHECK(model.predict(g) == Catch::Approx(model.predict(r)).margin(1e-6));
}

TEST_CASE("a slice-count mismatch with the readout coefficients is rejected", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 4;
    // Parameters sized for T=3 cannot consume a T=5 sequence.
    LdgModel model(cfg, init_ldg_parameters(cfg, 3, 1), true);
    CHECK_THROWS_AS(model.predict(chain_sequence(4, 5, 1)), ValidationError);
}

TEST_CASE("sequence training improves on a separable toy task", "[ldg]") {
    LdgConfig cfg;
    cfg.hidden = 6;
    const int T = 3;
    std::vector<DynamicGraphSequence> pos, neg;
    for (uint64_t s = 0; s < 12; ++s) {
        DynamicGraphSequence p1 = chain_sequence(6, T, s);
        p1.label = 1;
        for (GraphNode& n : p1.nodes) n.features[kNTS] += 40.0;
        pos.push_back(std::move(p1));
        DynamicGraphSequence n0 = chain_sequence(3, T, s + 60);
        n0.label = 0;
        neg.push_back(std::move(n0));
    }
    std::vector<const DynamicGraphSequence*> train, val;
    std::vector<int> val_labels;
    for (size_t i = 0; i < pos.size(); ++i) {
        ((i < 9) ? train : val).push_back(&pos[i]);
        ((i < 9) ? train : val).push_back(&neg[i]);
        if (i >= 9) {
            val_labels.push_back(1);
            val_labels.push_back(0);
        }
    }
    LdgModel model(cfg, init_ldg_parameters(cfg, T, 21), false);
    BranchTrainOptions opt;
    opt.epochs = 40;
    opt.patience = 40;
    opt.batch = 6;
    opt.lr = 0.02;
    opt.seed = 5;
    BranchTrainResult r = train_ldg(model, train, val, val_labels, opt);
    CHECK(model.fitted());
    REQUIRE_FALSE(r.epoch_train_loss.empty());
    CHECK(r.best_val_f1 == 1.0);

    LdgModel model2(cfg, init_ldg_parameters(cfg, T, 21), false);
    BranchTrainResult r2 = train_ldg(model2, train, val, val_labels, opt);
    CHECK(r2.epoch_train_loss == r.epoch_train_loss);
    CHECK(model2.predict(pos[0]) == model.predict(pos[0]));
}
