#pragma once

#include <string>
#include <vector>

#include "dbg4eth/autodiff.hpp"
#include "dbg4eth/graphs.hpp"
#include "dbg4eth/metrics.hpp"
#include "dbg4eth/training.hpp"

namespace dbg4eth {

// ---------------------------------------------------------------------------
// Adaptive augmentation
// ---------------------------------------------------------------------------

enum class CentralityMeasure { Degree, Eigenvector, PageRank };

inline CentralityMeasure centrality_from_name(const std::string& s) {
    if (s == "degree") return CentralityMeasure::Degree;
    if (s == "eigenvector") return CentralityMeasure::Eigenvector;
    if (s == "pagerank") return CentralityMeasure::PageRank;
    throw ConfigError("unknown centrality measure '" + s + "'");
}

inline std::string centrality_name(CentralityMeasure m) {
    switch (m) {
        case CentralityMeasure::Degree: return "degree";
        case CentralityMeasure::Eigenvector: return "eigenvector";
        default: return "pagerank";
    }
}

struct AugmentationView {
    double p_edge = 0.0;     // expected removed edge fraction
    double p_feature = 0.0;  // fraction of the 15 feature dims to zero
};

struct AugmentationConfig {
    AugmentationView view1{0.3, 0.1};
    AugmentationView view2{0.4, 0.0};
    CentralityMeasure centrality = CentralityMeasure::Degree;
};

namespace detail {

inline std::vector<double> node_centrality(const StaticSubgraph& g, CentralityMeasure kind) {
    int n = static_cast<int>(g.nodes.size());
    std::vector<double> phi(n, 0.0);
    if (n == 0) return phi;
    switch (kind) {
        case CentralityMeasure::Degree: {
            std::vector<std::vector<bool>> seen(n, std::vector<bool>(n, false));
            for (const StaticEdge& e : g.edges) {
                if (e.src == e.dst) continue;
                if (!seen[e.src][e.dst]) {
                    seen[e.src][e.dst] = seen[e.dst][e.src] = true;
                    phi[e.src] += 1.0;
                    phi[e.dst] += 1.0;
                }
            }
            break;
        }
        case CentralityMeasure::Eigenvector: {
            // Power iteration on A_sym + I; the identity term damps
            // oscillation on bipartite structures.
            std::vector<std::vector<double>> adj(n, std::vector<double>(n, 0.0));
            for (const StaticEdge& e : g.edges)
                if (e.src != e.dst) adj[e.src][e.dst] = adj[e.dst][e.src] = 1.0;
            for (int i = 0; i < n; ++i) adj[i][i] = 1.0;
            std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
            for (int iter = 0; iter < 200; ++iter) {
                std::vector<double> y(n, 0.0);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) y[i] += adj[i][j] * x[j];
                double norm = 0.0;
                for (double v : y) norm += v * v;
                norm = std::sqrt(std::max(norm, 1e-30));
                for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
            }
            phi = x;
            break;
        }
        case CentralityMeasure::PageRank: {
            constexpr double d = 0.85;
            std::vector<std::vector<int>> out_edges(n);
            std::vector<int> outdeg(n, 0);
            for (const StaticEdge& e : g.edges) {
                if (e.src == e.dst) continue;
                out_edges[e.src].push_back(e.dst);
                ++outdeg[e.src];
            }
            std::vector<double> pr(n, 1.0 / n);
            for (int iter = 0; iter < 100; ++iter) {
                std::vector<double> next(n, (1.0 - d) / n);
                double dangling = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (outdeg[i] == 0) {
                        dangling += pr[i];
                        continue;
                    }
                    double share = d * pr[i] / outdeg[i];
                    for (int j : out_edges[i]) next[j] += share;
                }
                for (int i = 0; i < n; ++i) next[i] += d * dangling / n;
                pr = next;
            }
            phi = pr;
            break;
        }
    }
    return phi;
}

}  // namespace detail

// Produces one augmented view: centrality-adaptive edge removal (low
// centrality edges are dropped more often; the expected removed fraction
// equals p_edge with per-edge probability capped at 0.9) plus uniform
// masking of ceil(p_feature * 15) feature dimensions across all nodes.
// Deterministic in (graph, config, view, seed). The label is preserved.
inline StaticSubgraph augment_view(const StaticSubgraph& g, const AugmentationConfig& cfg,
                                   int view, uint64_t seed) {
    if (view != 0 && view != 1) throw ValidationError("augment_view: view must be 0 or 1");
    const AugmentationView& av = view == 0 ? cfg.view1 : cfg.view2;
    if (av.p_edge < 0 || av.p_edge > 1 || av.p_feature < 0 || av.p_feature > 1)
        throw ValidationError("augment_view: probabilities must lie in [0, 1]");

    StaticSubgraph out = g;
    Rng rng(derive_seed(seed, view == 0 ? "aug.view1" : "aug.view2"));

    if (!g.edges.empty() && av.p_edge > 0.0) {
        std::vector<double> phi = detail::node_centrality(g, cfg.centrality);
        std::vector<double> s(g.edges.size());
        double s_max = -1e300, s_sum = 0.0;
        for (size_t i = 0; i < g.edges.size(); ++i) {
            double w = 0.5 * (phi[g.edges[i].src] + phi[g.edges[i].dst]);
            s[i] = std::log(w + 1e-12);
            s_max = std::max(s_max, s[i]);
            s_sum += s[i];
        }
        double s_mean = s_sum / static_cast<double>(s.size());
        out.edges.clear();
        for (size_t i = 0; i < g.edges.size(); ++i) {
            double p = s_max - s_mean < 1e-12
                           ? av.p_edge
                           : av.p_edge * (s_max - s[i]) / (s_max - s_mean);
            p = std::min(p, 0.9);
            if (rng.uniform() >= p) out.edges.push_back(g.edges[i]);
        }
    }

    int mask_dims = static_cast<int>(std::ceil(av.p_feature * static_cast<double>(kFeatureCount)));
    if (mask_dims > 0) {
        std::vector<int> dims(kFeatureCount);
        for (int i = 0; i < kFeatureCount; ++i) dims[i] = i;
        rng.shuffle(dims);
        for (int m = 0; m < mask_dims; ++m)
            for (GraphNode& node : out.nodes) node.features[dims[m]] = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

struct GsgConfig {
    int hidden = 128;
    int layers = 2;
    double leaky_slope = 0.01;
    double lambda_contrastive = 0.5;
    double tau = 0.5;
    AugmentationConfig aug;
};

// Weights are stored input-dim x output-dim; states are row vectors. The
// attention score vector over [H_i || H_j] is split into a left half
// (applied to H_i) and a right half (applied to H_j); likewise theta_s over
// [c || H_j].
struct GsgParameters {
    Mat W_align;                   // 17 x d
    std::vector<Mat> theta_left;   // per layer, d x 1
    std::vector<Mat> theta_right;  // per layer, d x 1
    std::vector<Mat> W_attn;       // per layer, d x d
    Mat theta_s_left;              // d x 1 (applied to c)
    Mat theta_s_right;             // d x 1 (applied to H_j)
    Mat W_read;                    // d x d
    Mat w_head;                    // d x 1
    Mat b_head;                    // 1 x 1

    std::vector<Mat*> all() {
        std::vector<Mat*> ps{&W_align};
        for (size_t l = 0; l < W_attn.size(); ++l) {
            ps.push_back(&theta_left[l]);
            ps.push_back(&theta_right[l]);
            ps.push_back(&W_attn[l]);
        }
        ps.push_back(&theta_s_left);
        ps.push_back(&theta_s_right);
        ps.push_back(&W_read);
        ps.push_back(&w_head);
        ps.push_back(&b_head);
        return ps;
    }
};

inline GsgParameters init_gsg_parameters(const GsgConfig& cfg, uint64_t seed) {
    Rng rng(derive_seed(seed, "gsg.init"));
    int d = cfg.hidden;
    GsgParameters p;
    p.W_align = xavier_init(kFeatureCount + 2, d, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        p.theta_left.push_back(xavier_init(d, 1, rng));
        p.theta_right.push_back(xavier_init(d, 1, rng));
        p.W_attn.push_back(xavier_init(d, d, rng));
    }
    p.theta_s_left = xavier_init(d, 1, rng);
    p.theta_s_right = xavier_init(d, 1, rng);
    p.W_read = xavier_init(d, d, rng);
    p.w_head = xavier_init(d, 1, rng);
    p.b_head = Mat::zeros(1, 1);
    return p;
}

// Parameters bound to a tape as leaves, shared by every forward pass built on
// that tape so batched gradients accumulate into one leaf per parameter.
struct GsgParamVars {
    Var W_align;
    std::vector<Var> theta_left, theta_right, W_attn;
    Var theta_s_left, theta_s_right, W_read, w_head, b_head;

    static GsgParamVars bind(Tape& tape, const GsgParameters& p) {
        GsgParamVars v;
        v.W_align = ad::input(tape, p.W_align);
        for (size_t l = 0; l < p.W_attn.size(); ++l) {
            v.theta_left.push_back(ad::input(tape, p.theta_left[l]));
            v.theta_right.push_back(ad::input(tape, p.theta_right[l]));
            v.W_attn.push_back(ad::input(tape, p.W_attn[l]));
        }
        v.theta_s_left = ad::input(tape, p.theta_s_left);
        v.theta_s_right = ad::input(tape, p.theta_s_right);
        v.W_read = ad::input(tape, p.W_read);
        v.w_head = ad::input(tape, p.w_head);
        v.b_head = ad::input(tape, p.b_head);
        return v;
    }

    // Same order as GsgParameters::all().
    std::vector<Var> all() const {
        std::vector<Var> vs{W_align};
        for (size_t l = 0; l < W_attn.size(); ++l) {
            vs.push_back(theta_left[l]);
            vs.push_back(theta_right[l]);
            vs.push_back(W_attn[l]);
        }
        vs.push_back(theta_s_left);
        vs.push_back(theta_s_right);
        vs.push_back(W_read);
        vs.push_back(w_head);
        vs.push_back(b_head);
        return vs;
    }
};

struct GsgInputs {
    Mat x_cat;  // N x 17: log1p features || log1p center-edge [w, t]
    Mat mask;   // N x N: 0 on {i} union V_i, -1e30 elsewhere
};

// Raw counts, values and second-scale intervals are heavy-tailed, so encoder
// inputs are log1p-compressed. Persisted features stay raw.
inline GsgInputs gsg_inputs(const StaticSubgraph& g) {
    int n = static_cast<int>(g.nodes.size());
    GsgInputs in;
    in.x_cat = Mat::zeros(n, kFeatureCount + 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kFeatureCount; ++j)
            in.x_cat.at(i, j) = std::log1p(g.nodes[i].features[j]);

    int c = g.center_index;
    std::vector<double> rw(n, 0.0), rt(n, 0.0);
    in.mask = Mat(n, n, -1e30);
    for (int i = 0; i < n; ++i) in.mask.at(i, i) = 0.0;
    for (const StaticEdge& e : g.edges) {
        if (e.src != e.dst) {
            in.mask.at(e.src, e.dst) = 0.0;
            in.mask.at(e.dst, e.src) = 0.0;
        }
        if (e.src == c) {
            rw[e.dst] += e.w;
            rt[e.dst] += e.t;
        }
        if (e.dst == c) {
            rw[e.src] += e.w;
            rt[e.src] += e.t;
        }
    }
    for (int i = 0; i < n; ++i) {
        in.x_cat.at(i, kFeatureCount) = std::log1p(rw[i]);
        in.x_cat.at(i, kFeatureCount + 1) = std::log1p(rt[i]);
    }
    return in;
}

struct GsgTrace {
    // Per layer, per node: sum of attention weights over the normalization set.
    std::vector<std::vector<double>> alpha_row_sums;
    Mat last_alpha;            // dense attention of the last layer
    Mat node_states;           // N x d after the final attention layer
    std::vector<double> beta;  // readout attention, last entry is the summary
    double beta_sum = 0.0;
};

struct GsgForward {
    Var logit;      // 1 x 1
    Var embedding;  // 1 x d
};

inline GsgForward gsg_forward(Tape& tape, const GsgParamVars& p, const GsgConfig& cfg,
                              const StaticSubgraph& g, GsgTrace* trace = nullptr) {
    if (g.nodes.empty()) throw ValidationError("gsg_forward: graph has no nodes");
    GsgInputs in = gsg_inputs(g);
    Var x = ad::input(tape, in.x_cat);
    Var h = ad::leaky_relu(ad::matmul(x, p.W_align), cfg.leaky_slope);

    for (size_t l = 0; l < p.W_attn.size(); ++l) {
        Var ha = ad::matmul(h, p.W_attn[l]);
        Var left = ad::matmul(h, p.theta_left[l]);
        Var right = ad::matmul(h, p.theta_right[l]);
        Var scores = ad::leaky_relu(ad::broadcast_outer_add(left, right), cfg.leaky_slope);
        Var alpha = ad::softmax_rows(ad::add_const(scores, in.mask));
        if (trace) {
            std::vector<double> sums;
            const Mat& av = alpha.v();
            for (int i = 0; i < av.rows; ++i) {
                double srow = 0.0;
                for (int j = 0; j < av.cols; ++j) srow += av.at(i, j);
                sums.push_back(srow);
            }
            trace->alpha_row_sums.push_back(std::move(sums));
            trace->last_alpha = alpha.v();
        }
        h = ad::elu(ad::matmul(alpha, ha));
    }
    if (trace) trace->node_states = h.v();

    Var c = ad::colmax(h);
    Var rows = ad::vstack({h, c});
    Var s_left = ad::matmul(c, p.theta_s_left);      // 1 x 1
    Var s_right = ad::matmul(rows, p.theta_s_right);  // (N+1) x 1
    Var scores = ad::leaky_relu(ad::add_rowvec(s_right, s_left), cfg.leaky_slope);
    Var beta = ad::softmax_rows(ad::transpose(scores));  // 1 x (N+1)
    if (trace) {
        trace->beta.assign(beta.v().a.begin(), beta.v().a.end());
        trace->beta_sum = 0.0;
        for (double b : beta.v().a) trace->beta_sum += b;
    }
    Var read = ad::matmul(rows, p.W_read);
    Var g_emb = ad::elu(ad::matmul(beta, read));  // 1 x d

    Var logit = ad::add(ad::matmul(g_emb, p.w_head), p.b_head);
    return {logit, g_emb};
}

// ---------------------------------------------------------------------------
// Contrastive objective
// ---------------------------------------------------------------------------

// Cross-view InfoNCE on cosine similarities, both anchor directions averaged.
// Pair (g1[i], g2[i]) is the positive; g2[j], j != i, are the negatives of
// anchor g1[i] (and symmetrically). Batches below 2 carry no negatives; the
// term is skipped and reported through `skipped`.
inline Var contrastive_nt_xent(Tape& tape, const std::vector<Var>& g1,
                               const std::vector<Var>& g2, double tau,
                               bool* skipped = nullptr) {
    if (g1.size() != g2.size())
        throw ValidationError("contrastive loss: view batches must have equal size");
    if (g1.size() < 2) {
        if (skipped) *skipped = true;
        return ad::input(tape, Mat(1, 1, 0.0));
    }
    if (skipped) *skipped = false;
    Var n1 = ad::normalize_rows(ad::vstack(g1));
    Var n2 = ad::normalize_rows(ad::vstack(g2));
    Var sims = ad::scale(ad::matmul(n1, ad::transpose(n2)), 1.0 / tau);
    Var l1 = ad::mean_all(ad::log_op(ad::diag(ad::softmax_rows(sims))));
    Var l2 = ad::mean_all(ad::log_op(ad::diag(ad::softmax_rows(ad::transpose(sims)))));
    return ad::scale(ad::add(l1, l2), -0.5);
}

inline double contrastive_loss_value(const std::vector<std::vector<double>>& g1,
                                     const std::vector<std::vector<double>>& g2, double tau,
                                     bool* skipped = nullptr) {
    Tape tape;
    std::vector<Var> v1, v2;
    for (const auto& r : g1) v1.push_back(ad::input(tape, Mat::row(r)));
    for (const auto& r : g2) v2.push_back(ad::input(tape, Mat::row(r)));
    return contrastive_nt_xent(tape, v1, v2, tau, skipped).v().at(0, 0);
}

// ---------------------------------------------------------------------------
// Model and training
// ---------------------------------------------------------------------------

class GsgModel {
public:
    GsgModel() = default;
    GsgModel(GsgConfig cfg, GsgParameters params, bool fitted)
        : cfg_(std::move(cfg)), params_(std::move(params)), fitted_(fitted) {}

    const GsgConfig& config() const { return cfg_; }
    const GsgParameters& parameters() const { return params_; }
    GsgParameters& parameters() { return params_; }
    bool fitted() const { return fitted_; }
    void mark_fitted() { fitted_ = true; }

    // Raw branch output (pre-calibration logit).
    double predict(const StaticSubgraph& g, GsgTrace* trace = nullptr) const {
        if (!fitted_)
            throw NotFittedError("gsg model: predict called before training or loading");
        Tape tape;
        GsgParamVars pv = GsgParamVars::bind(tape, params_);
        return gsg_forward(tape, pv, cfg_, g, trace).logit.v().at(0, 0);
    }

private:
    GsgConfig cfg_;
    GsgParameters params_;
    bool fitted_ = false;
};

// Supervised BCE on the head logit plus lambda * contrastive over two fresh
// augmented views per graph per epoch. Adam, shuffled mini-batches, early
// stopping on validation F1 with best-parameter restore.
inline BranchTrainResult train_gsg(GsgModel& model,
                                   const std::vector<const StaticSubgraph*>& train,
                                   const std::vector<const StaticSubgraph*>& val,
                                   const std::vector<int>& val_labels,
                                   const BranchTrainOptions& opt) {
    if (train.empty()) throw ValidationError("train_gsg: empty training set");
    if (val.size() != val_labels.size())
        throw ValidationError("train_gsg: validation labels mismatch");
    const GsgConfig& cfg = model.config();
    GsgParameters& params = model.parameters();
    AdamOptimizer adam(opt.lr);
    Rng order_rng(derive_seed(opt.seed, "gsg.order"));

    BranchTrainResult result;
    GsgParameters best = params;
    double best_f1 = -1.0;
    int patience_left = opt.patience;

    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    auto val_f1 = [&]() {
        GsgModel probe(cfg, params, true);
        std::vector<double> probs;
        probs.reserve(val.size());
        for (const StaticSubgraph* g : val) probs.push_back(sigmoid(probe.predict(*g)));
        return detail::threshold_f1(probs, val_labels);
    };

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += opt.batch) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch));
            Tape tape;
            GsgParamVars pv = GsgParamVars::bind(tape, params);

            std::vector<Var> logits, view1, view2;
            Mat labels(static_cast<int>(end - start), 1);
            for (size_t k = start; k < end; ++k) {
                const StaticSubgraph& g = *train[order[k]];
                logits.push_back(gsg_forward(tape, pv, cfg, g).logit);
                labels.at(static_cast<int>(k - start), 0) = g.label;
                uint64_t aug_seed = derive_seed(opt.seed, "gsg.aug") ^
                                    (static_cast<uint64_t>(epoch) << 20) ^
                                    static_cast<uint64_t>(order[k]);
                view1.push_back(
                    gsg_forward(tape, pv, cfg, augment_view(g, cfg.aug, 0, aug_seed)).embedding);
                view2.push_back(
                    gsg_forward(tape, pv, cfg, augment_view(g, cfg.aug, 1, aug_seed)).embedding);
            }

            Var z = ad::vstack(logits);
            Var bce = ad::mean_all(ad::sub(ad::softplus(z), ad::mul_const(z, labels)));
            bool skipped = false;
            Var contrast = contrastive_nt_xent(tape, view1, view2, cfg.tau, &skipped);
            Var loss = skipped ? bce : ad::add(bce, ad::scale(contrast, cfg.lambda_contrastive));
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
