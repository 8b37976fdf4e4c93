#pragma once

#include <string>
#include <vector>

#include "dbg4eth/autodiff.hpp"
#include "dbg4eth/graphs.hpp"
#include "dbg4eth/metrics.hpp"
#include "dbg4eth/training.hpp"

namespace dbg4eth {

struct LdgConfig {
    int hidden = 64;
    double pool_rate = 0.1;
    int pool_levels = 2;
    int cluster_cap = 64;
};

struct GruWeights {
    Mat W_u, V_u, W_r, V_r, W_h, V_h;  // each d x d, no biases
};

struct LdgParameters {
    Mat W_in;                  // 15 x d input projection, h_0 = X W_in
    Mat W_gcn;                 // d x d
    GruWeights gru;            // shared across slices
    std::vector<Mat> W_pool;   // per pooling level, d x cluster_cap
    Mat alpha;                 // T x 1 temporal attention logits
    Mat theta_g;               // d x 1 head
    Mat b_g;                   // 1 x 1
    Mat w_link, b_link;        // 1 x 1 affine link for the training logit

    std::vector<Mat*> all() {
        std::vector<Mat*> ps{&W_in,    &W_gcn,   &gru.W_u, &gru.V_u, &gru.W_r,
                             &gru.V_r, &gru.W_h, &gru.V_h};
        for (Mat& w : W_pool) ps.push_back(&w);
        ps.push_back(&alpha);
        ps.push_back(&theta_g);
        ps.push_back(&b_g);
        ps.push_back(&w_link);
        ps.push_back(&b_link);
        return ps;
    }
};

inline LdgParameters init_ldg_parameters(const LdgConfig& cfg, int T, uint64_t seed) {
    Rng rng(derive_seed(seed, "ldg.init"));
    int d = cfg.hidden;
    LdgParameters p;
    p.W_in = xavier_init(kFeatureCount, d, rng);
    p.W_gcn = xavier_init(d, d, rng);
    p.gru = {xavier_init(d, d, rng), xavier_init(d, d, rng), xavier_init(d, d, rng),
             xavier_init(d, d, rng), xavier_init(d, d, rng), xavier_init(d, d, rng)};
    for (int l = 0; l < cfg.pool_levels; ++l)
        p.W_pool.push_back(xavier_init(d, cfg.cluster_cap, rng));
    p.alpha = Mat::zeros(T, 1);
    p.theta_g = xavier_init(d, 1, rng);
    p.b_g = Mat::zeros(1, 1);
    p.w_link = Mat(1, 1, 1.0);
    p.b_link = Mat::zeros(1, 1);
    return p;
}

struct LdgParamVars {
    Var W_in, W_gcn;
    Var W_u, V_u, W_r, V_r, W_h, V_h;
    std::vector<Var> W_pool;
    Var alpha, theta_g, b_g, w_link, b_link;

    static LdgParamVars bind(Tape& tape, const LdgParameters& p) {
        LdgParamVars v;
        v.W_in = ad::input(tape, p.W_in);
        v.W_gcn = ad::input(tape, p.W_gcn);
        v.W_u = ad::input(tape, p.gru.W_u);
        v.V_u = ad::input(tape, p.gru.V_u);
        v.W_r = ad::input(tape, p.gru.W_r);
        v.V_r = ad::input(tape, p.gru.V_r);
        v.W_h = ad::input(tape, p.gru.W_h);
        v.V_h = ad::input(tape, p.gru.V_h);
        for (const Mat& w : p.W_pool) v.W_pool.push_back(ad::input(tape, w));
        v.alpha = ad::input(tape, p.alpha);
        v.theta_g = ad::input(tape, p.theta_g);
        v.b_g = ad::input(tape, p.b_g);
        v.w_link = ad::input(tape, p.w_link);
        v.b_link = ad::input(tape, p.b_link);
        return v;
    }

    // Same order as LdgParameters::all().
    std::vector<Var> all() const {
        std::vector<Var> vs{W_in, W_gcn, W_u, V_u, W_r, V_r, W_h, V_h};
        for (Var w : W_pool) vs.push_back(w);
        vs.push_back(alpha);
        vs.push_back(theta_g);
        vs.push_back(b_g);
        vs.push_back(w_link);
        vs.push_back(b_link);
        return vs;
    }
};

// ---------------------------------------------------------------------------
// Building blocks (tape form + plain-matrix wrappers for direct use)
// ---------------------------------------------------------------------------

namespace ldg_ops {

// Symmetric degree normalization: A_hat = D^{-1/2} (A + A^T + I) D^{-1/2}.
// The +I keeps degrees >= 1, so the rsqrt is always defined.
inline Var normalize_adj_t(Tape& tape, Var a) {
    int n = a.rows();
    Var tilde = ad::add_const(ad::add(a, ad::transpose(a)), Mat::identity(n));
    Var deg = ad::matmul(tilde, ad::input(tape, Mat(n, 1, 1.0)));
    Var dinv = ad::rsqrt(deg);
    Var scaler = ad::matmul(dinv, ad::transpose(dinv));
    return ad::hadamard(scaler, tilde);
}

inline Var gcn_step_t(Tape& tape, Var h_prev, Var a, Var w, bool relu_activation) {
    Var u = ad::matmul(ad::matmul(normalize_adj_t(tape, a), h_prev), w);
    return relu_activation ? ad::relu(u) : u;
}

struct GruVars {
    Var W_u, V_u, W_r, V_r, W_h, V_h;
};

inline Var one_minus(Var x) {
    return ad::add_const(ad::scale(x, -1.0), Mat(x.rows(), x.cols(), 1.0));
}

inline Var gru_step_t(Tape& tape, Var u_in, Var h_prev, const GruVars& w) {
    (void)tape;
    Var u = ad::sigmoid_op(ad::add(ad::matmul(u_in, w.W_u), ad::matmul(h_prev, w.V_u)));
    Var r = ad::sigmoid_op(ad::add(ad::matmul(u_in, w.W_r), ad::matmul(h_prev, w.V_r)));
    Var h_tilde =
        ad::tanh_op(ad::add(ad::matmul(u_in, w.W_h), ad::matmul(ad::hadamard(r, h_prev), w.V_h)));
    return ad::add(ad::hadamard(one_minus(u), h_prev), ad::hadamard(u, h_tilde));
}

struct PoolVarsOut {
    Var h_pool;  // C x d
    Var a_pool;  // C x C
    Var m;       // N x C assignment
};

// One pooling level: M = row softmax of a one-layer GCN mapping to
// n_clusters columns; h_pool = M^T h; A_pool = M^T A M (raw adjacency).
inline PoolVarsOut diffpool_step_t(Tape& tape, Var a, Var h, Var w_pool, int n_clusters) {
    if (n_clusters < 1) throw ValidationError("diffpool: cluster count must be >= 1");
    if (n_clusters > w_pool.cols())
        throw ValidationError("diffpool: cluster count exceeds assignment weight capacity");
    Var logits = ad::matmul(ad::matmul(normalize_adj_t(tape, a), h),
                            ad::first_cols(w_pool, n_clusters));
    Var m = ad::softmax_rows(logits);
    Var mt = ad::transpose(m);
    return {ad::matmul(mt, h), ad::matmul(ad::matmul(mt, a), m), m};
}

}  // namespace ldg_ops

inline Mat normalized_adjacency(const Mat& a) {
    Tape tape;
    return ldg_ops::normalize_adj_t(tape, ad::input(tape, a)).v();
}

// U_t = sigma(A_hat h_prev W); sigma is ReLU in the model, identity exposed
// for linear checks.
inline Mat gcn_step(const Mat& h_prev, const Mat& a, const Mat& w, bool relu_activation = true) {
    Tape tape;
    return ldg_ops::gcn_step_t(tape, ad::input(tape, h_prev), ad::input(tape, a),
                               ad::input(tape, w), relu_activation)
        .v();
}

inline Mat gru_step(const Mat& u_in, const Mat& h_prev, const GruWeights& w) {
    Tape tape;
    ldg_ops::GruVars gv{ad::input(tape, w.W_u), ad::input(tape, w.V_u), ad::input(tape, w.W_r),
                        ad::input(tape, w.V_r), ad::input(tape, w.W_h), ad::input(tape, w.V_h)};
    return ldg_ops::gru_step_t(tape, ad::input(tape, u_in), ad::input(tape, h_prev), gv).v();
}

// h_t = (1 - u) ⊙ h_prev + u ⊙ h_tilde, exposed so gate boundaries can be
// checked directly.
inline Mat gru_combine(const Mat& u, const Mat& h_prev, const Mat& h_tilde) {
    Mat out = h_prev;
    for (size_t i = 0; i < out.size(); ++i)
        out.a[i] = (1.0 - u.a[i]) * h_prev.a[i] + u.a[i] * h_tilde.a[i];
    return out;
}

struct DiffPoolResult {
    Mat h_pool;
    Mat a_pool;
    Mat assignment;
};

inline DiffPoolResult diffpool_step(const Mat& a, const Mat& h, const Mat& w_pool,
                                    int n_clusters) {
    Tape tape;
    auto out = ldg_ops::diffpool_step_t(tape, ad::input(tape, a), ad::input(tape, h),
                                        ad::input(tape, w_pool), n_clusters);
    return {out.h_pool.v(), out.a_pool.v(), out.m.v()};
}

// gamma = sum_t softmax(alpha)_t * pooled_t over T slice summaries (1 x d).
inline Mat temporal_readout(const std::vector<Mat>& pooled, const Mat& alpha_logits,
                            std::vector<double>* weights = nullptr) {
    if (pooled.empty()) throw ValidationError("temporal_readout: no slice summaries");
    if (alpha_logits.rows != static_cast<int>(pooled.size()) || alpha_logits.cols != 1)
        throw ValidationError("temporal_readout: alpha must be T x 1");
    Tape tape;
    std::vector<Var> rows;
    for (const Mat& p : pooled) rows.push_back(ad::input(tape, p));
    Var a = ad::softmax_rows(ad::transpose(ad::input(tape, alpha_logits)));
    if (weights) weights->assign(a.v().a.begin(), a.v().a.end());
    return ad::matmul(a, ad::vstack(rows)).v();
}

// ---------------------------------------------------------------------------
// Full forward
// ---------------------------------------------------------------------------

struct LdgTrace {
    // Per slice, per level, per input row: assignment row sum (must be 1).
    std::vector<std::vector<std::vector<double>>> assignment_row_sums;
    std::vector<std::vector<int>> cluster_counts;  // per slice, per level
    std::vector<double> temporal_weights;          // softmax(alpha), sums to 1
};

struct LdgForward {
    Var l;      // 1 x 1, the branch output, >= 0
    Var logit;  // 1 x 1, w_link * l + b_link for BCE training
};

inline Mat slice_adjacency(const DynamicGraphSequence& g, int slice) {
    int n = static_cast<int>(g.nodes.size());
    Mat a(n, n);
    for (const SliceEdge& e : g.slices[slice]) a.at(e.src, e.dst) += e.w;
    return a;
}

inline Mat ldg_feature_matrix(const DynamicGraphSequence& g) {
    int n = static_cast<int>(g.nodes.size());
    Mat x(n, kFeatureCount);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kFeatureCount; ++j) x.at(i, j) = std::log1p(g.nodes[i].features[j]);
    return x;
}

inline LdgForward ldg_forward(Tape& tape, const LdgParamVars& p, const LdgConfig& cfg,
                              const DynamicGraphSequence& g, LdgTrace* trace = nullptr) {
    if (g.nodes.empty()) throw ValidationError("ldg_forward: graph has no nodes");
    if (g.slices.empty()) throw ValidationError("ldg_forward: sequence has no slices");
    if (p.alpha.rows() != static_cast<int>(g.slices.size()))
        throw ValidationError("ldg_forward: temporal attention length differs from T");

    ldg_ops::GruVars gru{p.W_u, p.V_u, p.W_r, p.V_r, p.W_h, p.V_h};
    Var h = ad::matmul(ad::input(tape, ldg_feature_matrix(g)), p.W_in);

    std::vector<Var> pooled;
    for (size_t t = 0; t < g.slices.size(); ++t) {
        Var a_t = ad::input(tape, slice_adjacency(g, static_cast<int>(t)));
        Var u = ldg_ops::gcn_step_t(tape, h, a_t, p.W_gcn, true);
        h = ldg_ops::gru_step_t(tape, u, h, gru);

        Var hp = h;
        Var ap = a_t;
        if (trace) {
            trace->assignment_row_sums.emplace_back();
            trace->cluster_counts.emplace_back();
        }
        for (int level = 0; level < cfg.pool_levels; ++level) {
            int n_in = hp.rows();
            int c = level == cfg.pool_levels - 1
                        ? 1
                        : std::max(1, static_cast<int>(cfg.pool_rate * n_in));
            c = std::min(c, cfg.cluster_cap);
            auto out = ldg_ops::diffpool_step_t(tape, ap, hp, p.W_pool[level], c);
            if (trace) {
                std::vector<double> sums;
                const Mat& m = out.m.v();
                for (int i = 0; i < m.rows; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < m.cols; ++j) s += m.at(i, j);
                    sums.push_back(s);
                }
                trace->assignment_row_sums.back().push_back(std::move(sums));
                trace->cluster_counts.back().push_back(c);
            }
            hp = out.h_pool;
            ap = out.a_pool;
        }
        pooled.push_back(hp);  // 1 x d after the final level
    }

    Var weights = ad::softmax_rows(ad::transpose(p.alpha));  // 1 x T
    if (trace) trace->temporal_weights.assign(weights.v().a.begin(), weights.v().a.end());
    Var gamma = ad::matmul(weights, ad::vstack(pooled));  // 1 x d
    Var l = ad::relu(ad::add(ad::matmul(gamma, p.theta_g), p.b_g));
    Var logit = ad::add(ad::matmul(l, p.w_link), p.b_link);
    return {l, logit};
}

// ---------------------------------------------------------------------------
// Model and training
// ---------------------------------------------------------------------------

class LdgModel {
public:
    LdgModel() = default;
    LdgModel(LdgConfig cfg, LdgParameters params, bool fitted)
        : cfg_(std::move(cfg)), params_(std::move(params)), fitted_(fitted) {}

    const LdgConfig& config() const { return cfg_; }
    const LdgParameters& parameters() const { return params_; }
    LdgParameters& parameters() { return params_; }
    bool fitted() const { return fitted_; }
    void mark_fitted() { fitted_ = true; }

    // Raw branch output (pre-calibration, >= 0 by the ReLU head).
    double predict(const DynamicGraphSequence& g, LdgTrace* trace = nullptr) const {
        if (!fitted_)
            throw NotFittedError("ldg model: predict called before training or loading");
        Tape tape;
        LdgParamVars pv = LdgParamVars::bind(tape, params_);
        return ldg_forward(tape, pv, cfg_, g, trace).l.v().at(0, 0);
    }

    double predict_logit(const DynamicGraphSequence& g) const {
        if (!fitted_)
            throw NotFittedError("ldg model: predict called before training or loading");
        Tape tape;
        LdgParamVars pv = LdgParamVars::bind(tape, params_);
        return ldg_forward(tape, pv, cfg_, g).logit.v().at(0, 0);
    }

private:
    LdgConfig cfg_;
    LdgParameters params_;
    bool fitted_ = false;
};

// BCE on sigmoid(w_link * l + b_link); Adam; early stopping on validation F1
// with best-parameter restore. Mirrors train_gsg without the contrastive term.
inline BranchTrainResult train_ldg(LdgModel& model,
                                   const std::vector<const DynamicGraphSequence*>& train,
                                   const std::vector<const DynamicGraphSequence*>& val,
                                   const std::vector<int>& val_labels,
                                   const BranchTrainOptions& opt) {
    if (train.empty()) throw ValidationError("train_ldg: empty training set");
    if (val.size() != val_labels.size())
        throw ValidationError("train_ldg: validation labels mismatch");
    const LdgConfig& cfg = model.config();
    LdgParameters& params = model.parameters();
    AdamOptimizer adam(opt.lr);
    Rng order_rng(derive_seed(opt.seed, "ldg.order"));

    BranchTrainResult result;
    LdgParameters best = params;
    double best_f1 = -1.0;
    int patience_left = opt.patience;

    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    auto val_f1 = [&]() {
        LdgModel probe(cfg, params, true);
        std::vector<double> probs;
        probs.reserve(val.size());
        for (const DynamicGraphSequence* g : val) probs.push_back(sigmoid(probe.predict_logit(*g)));
        return detail::threshold_f1(probs, val_labels);
    };

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += opt.batch) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch));
            Tape tape;
            LdgParamVars pv = LdgParamVars::bind(tape, params);

            std::vector<Var> logits;
            Mat labels(static_cast<int>(end - start), 1);
            for (size_t k = start; k < end; ++k) {
                const DynamicGraphSequence& g = *train[order[k]];
                logits.push_back(ldg_forward(tape, pv, cfg, g).logit);
                labels.at(static_cast<int>(k - start), 0) = g.label;
            }
            Var z = ad::vstack(logits);
            Var loss = ad::mean_all(ad::sub(ad::softplus(z), ad::mul_const(z, labels)));
            tape.backward(loss.id);
            epoch_loss += loss.v().at(0, 0);
            ++batches;

            std::vector<Var> leaves = pv.all();
            std::vector<Mat> grads;
            grads.reserve(leaves.size());
            for (Var v : leaves) grads.push_back(v.g());
            adam.step(params.all(), grads);
        }
        result.epoch_train_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);
        result.epochs_run = epoch + 1;

        double f1 = val.empty() ? 0.0 : val_f1();
        if (f1 > best_f1 + 1e-12) {
            best_f1 = f1;
            best = params;
            patience_left = opt.patience;
        } else if (--patience_left <= 0) {
            break;
        }
    }

    params = best;
    model.mark_fitted();
    result.best_val_f1 = std::max(best_f1, 0.0);
    return result;
}

}  // namespace dbg4eth
