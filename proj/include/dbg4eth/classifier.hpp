#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dbg4eth/autodiff.hpp"
#include "dbg4eth/common.hpp"
#include "dbg4eth/matrix.hpp"

namespace dbg4eth {

using FeaturePair = std::array<double, 2>;

struct AccountPrediction {
    double probability = 0.0;
    int label = 0;
};

class BinaryClassifier {
public:
    virtual ~BinaryClassifier() = default;
    virtual void fit(const std::vector<FeaturePair>& x, const std::vector<int>& y) = 0;
    virtual double predict_probability(const FeaturePair& x) const = 0;
    virtual std::string kind() const = 0;
    bool fitted() const { return fitted_; }

protected:
    void require_fitted() const {
        if (!fitted_) throw NotFittedError(kind() + " classifier: predict before fit");
    }
    bool fitted_ = false;
};

inline AccountPrediction predict_account(const BinaryClassifier& model, const FeaturePair& x,
                                         double threshold = 0.5) {
    double p = model.predict_probability(x);
    return {p, p >= threshold ? 1 : 0};
}

namespace detail {

inline void check_fit_inputs(const std::vector<FeaturePair>& x, const std::vector<int>& y) {
    if (x.size() < 2) throw ValidationError("classifier fit: need at least 2 samples");
    if (x.size() != y.size()) throw ValidationError("classifier fit: features/labels mismatch");
    for (int v : y)
        if (v != 0 && v != 1) throw ValidationError("classifier fit: labels must be 0/1");
}

inline double smoothed_log_odds(const std::vector<int>& y) {
    double pos = 0.0;
    for (int v : y) pos += v;
    return logit((pos + 0.5) / (static_cast<double>(y.size()) + 1.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gradient-boosted trees on logistic loss, exact greedy splits over the two
// calibrated-probability inputs.
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double leaf = 0.0;
    int left = -1, right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double value(const FeaturePair& x) const {
        int i = 0;
        while (nodes[i].feature >= 0)
            i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].leaf;
    }
};

class BoostedTreesClassifier : public BinaryClassifier {
public:
    explicit BoostedTreesClassifier(int trees = 100, int depth = 3, double eta = 0.1,
                                    double lambda = 1.0)
        : trees_(trees), depth_(depth), eta_(eta), lambda_(lambda) {
        if (trees < 1 || depth < 1 || eta <= 0.0 || lambda < 0.0)
            throw ConfigError("boosted trees: invalid hyperparameters");
    }

    void fit(const std::vector<FeaturePair>& x, const std::vector<int>& y) override {
        detail::check_fit_inputs(x, y);
        forest_.clear();
        round_train_loss_.clear();
        bias_ = detail::smoothed_log_odds(y);

        bool has0 = false, has1 = false;
        for (int v : y) (v ? has1 : has0) = true;
        degenerate_ = !(has0 && has1);
        if (degenerate_) {
            // Constant-class data: the smoothed bias already predicts that
            // class; boosting would only inflate the margin.
            fitted_ = true;
            return;
        }

        size_t n = x.size();
        std::vector<double> margin(n, bias_);
        for (int round = 0; round < trees_; ++round) {
            std::vector<double> g(n), h(n);
            for (size_t i = 0; i < n; ++i) {
                double p = sigmoid(margin[i]);
                g[i] = p - y[i];
                h[i] = std::max(p * (1.0 - p), 1e-12);
            }
            RegressionTree tree;
            std::vector<int> all(n);
            for (size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
            build_node(tree, x, g, h, all, 0);
            for (size_t i = 0; i < n; ++i) margin[i] += eta_ * tree.value(x[i]);
            forest_.push_back(std::move(tree));

            double loss = 0.0;
            for (size_t i = 0; i < n; ++i)
                loss += std::log1p(std::exp(-std::fabs(margin[i]))) +
                        (y[i] ? std::max(-margin[i], 0.0) : std::max(margin[i], 0.0));
            round_train_loss_.push_back(loss / n);
        }
        fitted_ = true;
    }

    double predict_probability(const FeaturePair& x) const override {
        require_fitted();
        double margin = bias_;
        for (const RegressionTree& t : forest_) margin += eta_ * t.value(x);
        return sigmoid(margin);
    }

    std::string kind() const override { return "boosted_trees"; }

    double bias() const { return bias_; }
    bool degenerate() const { return degenerate_; }
    const std::vector<RegressionTree>& forest() const { return forest_; }
    const std::vector<double>& round_train_loss() const { return round_train_loss_; }

    // Loading support.
    void restore(double bias, bool degenerate, std::vector<RegressionTree> forest) {
        bias_ = bias;
        degenerate_ = degenerate;
        forest_ = std::move(forest);
        fitted_ = true;
    }
    int trees() const { return trees_; }
    int depth() const { return depth_; }
    double eta() const { return eta_; }
    double lambda() const { return lambda_; }

private:
    struct SplitChoice {
        bool found = false;
        int feature = 0;
        double threshold = 0.0;
        double gain = -std::numeric_limits<double>::infinity();
    };

    int build_node(RegressionTree& tree, const std::vector<FeaturePair>& x,
                   const std::vector<double>& g, const std::vector<double>& h,
                   const std::vector<int>& idx, int depth) {
        double G = 0.0, H = 0.0;
        for (int i : idx) {
            G += g[i];
            H += h[i];
        }
        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        if (depth >= depth_ || idx.size() < 2) {
            tree.nodes[node_id].leaf = -G / (H + lambda_);
            return node_id;
        }

        SplitChoice best;
        double parent_score = G * G / (H + lambda_);
        for (int f = 0; f < 2; ++f) {
            std::vector<int> order = idx;
            std::sort(order.begin(), order.end(),
                      [&](int a, int b) { return x[a][f] < x[b][f]; });
            double Gl = 0.0, Hl = 0.0;
            for (size_t k = 0; k + 1 < order.size(); ++k) {
                Gl += g[order[k]];
                Hl += h[order[k]];
                double lo = x[order[k]][f], hi = x[order[k + 1]][f];
                if (lo == hi) continue;
                double gain = Gl * Gl / (Hl + lambda_) +
                              (G - Gl) * (G - Gl) / (H - Hl + lambda_) - parent_score;
                double thr = 0.5 * (lo + hi);
                // Strictly-better wins; ties keep the lower feature index and
                // lower threshold so the fit is order-independent.
                if (!best.found || gain > best.gain + 1e-12 ||
                    (std::fabs(gain - best.gain) <= 1e-12 &&
                     (f < best.feature || (f == best.feature && thr < best.threshold)))) {
                    best = {true, f, thr, gain};
                }
            }
        }
        // Zero-gain splits are kept: balanced symmetric nodes (XOR-like) score
        // zero at the root yet still need the partition; regularization makes
        // genuinely useless splits strictly negative.
        if (!best.found || best.gain < -1e-12) {
            tree.nodes[node_id].leaf = -G / (H + lambda_);
            return node_id;
        }

        std::vector<int> left, right;
        for (int i : idx) (x[i][best.feature] < best.threshold ? left : right).push_back(i);
        tree.nodes[node_id].feature = best.feature;
        tree.nodes[node_id].threshold = best.threshold;
        tree.nodes[node_id].left = build_node(tree, x, g, h, left, depth + 1);
        tree.nodes[node_id].right = build_node(tree, x, g, h, right, depth + 1);
        return node_id;
    }

    int trees_, depth_;
    double eta_, lambda_;
    double bias_ = 0.0;
    bool degenerate_ = false;
    std::vector<RegressionTree> forest_;
    std::vector<double> round_train_loss_;
};

// ---------------------------------------------------------------------------
// Baselines for the ablation harness
// ---------------------------------------------------------------------------

class LogisticClassifier : public BinaryClassifier {
public:
    void fit(const std::vector<FeaturePair>& x, const std::vector<int>& y) override {
        detail::check_fit_inputs(x, y);
        bool has0 = false, has1 = false;
        for (int v : y) (v ? has1 : has0) = true;
        degenerate_ = !(has0 && has1);
        if (degenerate_) {
            theta_ = {0.0, 0.0, detail::smoothed_log_odds(y)};
            fitted_ = true;
            return;
        }
        // Newton iterations on [x0, x1, 1].
        theta_ = {0.0, 0.0, 0.0};
        for (int iter = 0; iter < 100; ++iter) {
            double grad[3] = {0, 0, 0};
            double hess[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
            for (size_t i = 0; i < x.size(); ++i) {
                double f[3] = {x[i][0], x[i][1], 1.0};
                double z = theta_[0] * f[0] + theta_[1] * f[1] + theta_[2];
                double p = sigmoid(z);
                double w = std::max(p * (1.0 - p), 1e-12);
                for (int a = 0; a < 3; ++a) {
                    grad[a] += (p - y[i]) * f[a];
                    for (int b = 0; b < 3; ++b) hess[a * 3 + b] += w * f[a] * f[b];
                }
            }
            for (int a = 0; a < 3; ++a) hess[a * 3 + a] += 1e-9;
            double step[3];
            solve3(hess, grad, step);
            double delta = 0.0;
            for (int a = 0; a < 3; ++a) {
                theta_[a] -= step[a];
                delta = std::max(delta, std::fabs(step[a]));
            }
            if (delta < 1e-10) break;
        }
        fitted_ = true;
    }

    double predict_probability(const FeaturePair& x) const override {
        require_fitted();
        return sigmoid(theta_[0] * x[0] + theta_[1] * x[1] + theta_[2]);
    }

    std::string kind() const override { return "logistic"; }
    bool degenerate() const { return degenerate_; }
    const std::array<double, 3>& coefficients() const { return theta_; }
    void restore(const std::array<double, 3>& theta, bool degenerate) {
        theta_ = theta;
        degenerate_ = degenerate;
        fitted_ = true;
    }

private:
    static void solve3(double a[9], const double b[3], double out[3]) {
        double m[9];
        double v[3] = {b[0], b[1], b[2]};
        std::copy(a, a + 9, m);
        for (int col = 0; col < 3; ++col) {
            int piv = col;
            for (int r = col + 1; r < 3; ++r)
                if (std::fabs(m[r * 3 + col]) > std::fabs(m[piv * 3 + col])) piv = r;
            if (piv != col) {
                for (int k = 0; k < 3; ++k) std::swap(m[col * 3 + k], m[piv * 3 + k]);
                std::swap(v[col], v[piv]);
            }
            for (int r = col + 1; r < 3; ++r) {
                double f = m[r * 3 + col] / m[col * 3 + col];
                for (int k = col; k < 3; ++k) m[r * 3 + k] -= f * m[col * 3 + k];
                v[r] -= f * v[col];
            }
        }
        for (int r = 2; r >= 0; --r) {
            out[r] = v[r];
            for (int k = r + 1; k < 3; ++k) out[r] -= m[r * 3 + k] * out[k];
            out[r] /= m[r * 3 + r];
        }
    }

    std::array<double, 3> theta_{0.0, 0.0, 0.0};
    bool degenerate_ = false;
};

class MlpClassifier : public BinaryClassifier {
public:
    explicit MlpClassifier(int hidden = 16, int epochs = 300, double lr = 0.05,
                           uint64_t seed = 17)
        : hidden_(hidden), epochs_(epochs), lr_(lr), seed_(seed) {
        if (hidden < 1) throw ConfigError("mlp classifier: hidden units must be >= 1");
        if (epochs < 1 || lr <= 0.0) throw ConfigError("mlp classifier: invalid hyperparameters");
    }

    void fit(const std::vector<FeaturePair>& x, const std::vector<int>& y) override {
        detail::check_fit_inputs(x, y);
        Rng rng(derive_seed(seed_, "mlp.init"));
        w1_ = xavier_init(2, hidden_, rng);
        b1_ = Mat::zeros(1, hidden_);
        w2_ = xavier_init(hidden_, 1, rng);
        b2_ = Mat::zeros(1, 1);

        int n = static_cast<int>(x.size());
        Mat xs(n, 2), ys(n, 1);
        for (int i = 0; i < n; ++i) {
            xs.at(i, 0) = x[i][0];
            xs.at(i, 1) = x[i][1];
            ys.at(i, 0) = y[i];
        }

        AdamOptimizer adam(lr_);
        std::vector<Mat*> params{&w1_, &b1_, &w2_, &b2_};
        for (int epoch = 0; epoch < epochs_; ++epoch) {
            Tape tape;
            Var vw1 = ad::input(tape, w1_), vb1 = ad::input(tape, b1_);
            Var vw2 = ad::input(tape, w2_), vb2 = ad::input(tape, b2_);
            Var hidden = ad::tanh_op(
                ad::add_rowvec(ad::matmul(ad::input(tape, xs), vw1), vb1));
            Var z = ad::add_rowvec(ad::matmul(hidden, vw2), vb2);
            Var loss = ad::mean_all(ad::sub(ad::softplus(z), ad::mul_const(z, ys)));
            tape.backward(loss.id);
            adam.step(params, {vw1.g(), vb1.g(), vw2.g(), vb2.g()});
        }
        fitted_ = true;
    }

    double predict_probability(const FeaturePair& x) const override {
        require_fitted();
        Mat h(1, hidden_);
        for (int j = 0; j < hidden_; ++j)
            h.at(0, j) = std::tanh(x[0] * w1_.at(0, j) + x[1] * w1_.at(1, j) + b1_.at(0, j));
        double z = b2_.at(0, 0);
        for (int j = 0; j < hidden_; ++j) z += h.at(0, j) * w2_.at(j, 0);
        return sigmoid(z);
    }

    std::string kind() const override { return "mlp"; }
    int hidden_units() const { return hidden_; }
    const Mat& w1() const { return w1_; }
    const Mat& b1() const { return b1_; }
    const Mat& w2() const { return w2_; }
    const Mat& b2() const { return b2_; }
    void restore(Mat w1, Mat b1, Mat w2, Mat b2) {
        w1_ = std::move(w1);
        b1_ = std::move(b1);
        w2_ = std::move(w2);
        b2_ = std::move(b2);
        hidden_ = w1_.cols;
        fitted_ = true;
    }

private:
    int hidden_, epochs_;
    double lr_;
    uint64_t seed_;
    Mat w1_, b1_, w2_, b2_;
};

struct ClassifierOptions {
    std::string kind = "boosted_trees";
    int trees = 100;
    int depth = 3;
    double eta = 0.1;
    int mlp_hidden = 16;
    uint64_t seed = 17;
};

inline std::unique_ptr<BinaryClassifier> make_classifier(const ClassifierOptions& opt) {
    if (opt.kind == "boosted_trees")
        return std::make_unique<BoostedTreesClassifier>(opt.trees, opt.depth, opt.eta);
    if (opt.kind == "logistic") return std::make_unique<LogisticClassifier>();
    if (opt.kind == "mlp") return std::make_unique<MlpClassifier>(opt.mlp_hidden, 300, 0.05, opt.seed);
    throw ConfigError("unknown classifier kind: " + opt.kind);
}

}  // namespace dbg4eth
