#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dbg4eth/common.hpp"

namespace dbg4eth {

// ---------------------------------------------------------------------------
// Confidence standardization: raw branch outputs -> (0,1)
// ---------------------------------------------------------------------------

struct ConfidenceStats {
    double mu = 0.0;
    double s = 1.0;  // population std of the fit sample
};

inline ConfidenceStats fit_confidence_stats(const std::vector<double>& raw) {
    if (raw.empty())
        throw ValidationError("confidence stats: cannot fit on an empty validation split");
    double mu = 0.0;
    for (double v : raw) mu += v;
    mu /= static_cast<double>(raw.size());
    double var = 0.0;
    for (double v : raw) var += (v - mu) * (v - mu);
    var /= static_cast<double>(raw.size());
    return {mu, std::sqrt(var)};
}

inline double confidence_from_raw(double raw, const ConfidenceStats& st) {
    if (st.s == 0.0) return 0.5;  // degenerate constant sample
    return sigmoid((raw - st.mu) / st.s);
}

inline std::vector<double> confidence_from_raw(const std::vector<double>& raw,
                                               const ConfidenceStats& st) {
    std::vector<double> out;
    out.reserve(raw.size());
    for (double v : raw) out.push_back(confidence_from_raw(v, st));
    return out;
}

// ---------------------------------------------------------------------------
// Expected calibration error, equal-width bins
// ---------------------------------------------------------------------------

inline double compute_ece(const std::vector<double>& confidences, const std::vector<int>& labels,
                          int bins = 10) {
    if (confidences.empty()) throw ValidationError("compute_ece: empty sample");
    if (confidences.size() != labels.size())
        throw ValidationError("compute_ece: confidences and labels differ in length");
    if (bins < 1) throw ValidationError("compute_ece: bins must be >= 1");
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<int> count(bins, 0);
    for (size_t i = 0; i < confidences.size(); ++i) {
        double c = confidences[i];
        if (c < 0.0 || c > 1.0)
            throw ValidationError("compute_ece: confidence outside [0,1]");
        int b = std::min(bins - 1, static_cast<int>(c * bins));
        conf_sum[b] += c;
        acc_sum[b] += labels[i];
        count[b] += 1;
    }
    double ece = 0.0;
    double n = static_cast<double>(confidences.size());
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        double conf = conf_sum[b] / count[b];
        double acc = acc_sum[b] / count[b];
        ece += (count[b] / n) * std::fabs(acc - conf);
    }
    return ece;
}

// ---------------------------------------------------------------------------
// Calibrators
// ---------------------------------------------------------------------------

enum class CalibratorMethod { kTemperature, kPlatt, kBeta, kHistogram, kIsotonic, kBbq };

inline const std::vector<CalibratorMethod>& all_calibrator_methods() {
    static const std::vector<CalibratorMethod> ms{
        CalibratorMethod::kTemperature, CalibratorMethod::kPlatt,
        CalibratorMethod::kBeta,        CalibratorMethod::kHistogram,
        CalibratorMethod::kIsotonic,    CalibratorMethod::kBbq};
    return ms;
}

inline std::string calibrator_method_name(CalibratorMethod m) {
    switch (m) {
        case CalibratorMethod::kTemperature: return "temperature";
        case CalibratorMethod::kPlatt: return "platt";
        case CalibratorMethod::kBeta: return "beta";
        case CalibratorMethod::kHistogram: return "histogram";
        case CalibratorMethod::kIsotonic: return "isotonic";
        case CalibratorMethod::kBbq: return "bbq";
    }
    throw ConfigError("unknown calibrator method enum value");
}

inline CalibratorMethod calibrator_method_from_name(const std::string& name) {
    for (CalibratorMethod m : all_calibrator_methods())
        if (calibrator_method_name(m) == name) return m;
    throw ConfigError("unknown calibrator method: " + name);
}

struct BbqScheme {
    std::vector<double> edges;  // size bins+1, edges[0]=0, edges.back()=1
    std::vector<double> rates;  // posterior positive rate per bin
    double weight = 0.0;        // normalized model weight
};

struct Calibrator {
    CalibratorMethod method = CalibratorMethod::kTemperature;
    size_t fit_samples = 0;
    // temperature
    double temperature = 1.0;
    // platt: sigmoid(a * logit(p) + b)
    double platt_a = 1.0, platt_b = 0.0;
    // beta: sigmoid(a * ln p - b * ln(1-p) + c), a,b >= 0
    double beta_a = 1.0, beta_b = 1.0, beta_c = 0.0;
    // histogram / isotonic piecewise data
    std::vector<double> bin_edges;
    std::vector<double> bin_values;
    std::vector<double> iso_x;
    std::vector<double> iso_y;
    // bbq
    std::vector<BbqScheme> bbq_schemes;
};

namespace detail {

inline int lookup_bin(const std::vector<double>& edges, double p) {
    // Bin j covers [edges[j], edges[j+1]); the last bin is closed above.
    int nb = static_cast<int>(edges.size()) - 1;
    auto it = std::upper_bound(edges.begin(), edges.end(), p);
    int j = static_cast<int>(it - edges.begin()) - 1;
    return std::clamp(j, 0, nb - 1);
}

// Equal-frequency edges over sorted confidences. Duplicate-heavy samples can
// collapse boundaries; collapsed bins are dropped so edges stay strictly
// increasing.
inline std::vector<double> equal_frequency_edges(std::vector<double> sorted_conf, int bins) {
    size_t n = sorted_conf.size();
    std::vector<double> edges{0.0};
    for (int k = 1; k < bins; ++k) {
        size_t idx = k * n / bins;
        if (idx == 0 || idx >= n) continue;
        double cut = 0.5 * (sorted_conf[idx - 1] + sorted_conf[idx]);
        if (cut > edges.back() && cut < 1.0) edges.push_back(cut);
    }
    edges.push_back(1.0);
    return edges;
}

inline double nll_of(const std::vector<double>& probs, const std::vector<int>& labels) {
    double nll = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double q = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
        nll -= labels[i] ? std::log(q) : std::log(1.0 - q);
    }
    return nll;
}

// Newton's method for logistic regression on fixed feature rows. Returns the
// coefficient vector; `dim` small (<= 3).
inline std::vector<double> logistic_newton(const std::vector<std::vector<double>>& feats,
                                           const std::vector<int>& labels,
                                           std::vector<double> theta) {
    size_t dim = theta.size();
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> grad(dim, 0.0);
        std::vector<double> hess(dim * dim, 0.0);
        for (size_t i = 0; i < feats.size(); ++i) {
            double z = 0.0;
            for (size_t j = 0; j < dim; ++j) z += theta[j] * feats[i][j];
            double q = sigmoid(z);
            double resid = q - labels[i];
            double w = std::max(q * (1.0 - q), 1e-12);
            for (size_t j = 0; j < dim; ++j) {
                grad[j] += resid * feats[i][j];
                for (size_t k = 0; k < dim; ++k) hess[j * dim + k] += w * feats[i][j] * feats[i][k];
            }
        }
        for (size_t j = 0; j < dim; ++j) hess[j * dim + j] += 1e-9;  // ridge for rank safety
        // Gaussian elimination with partial pivoting on the dim x dim system.
        std::vector<double> step = grad;
        for (size_t col = 0; col < dim; ++col) {
            size_t piv = col;
            for (size_t r = col + 1; r < dim; ++r)
                if (std::fabs(hess[r * dim + col]) > std::fabs(hess[piv * dim + col])) piv = r;
            if (piv != col) {
                for (size_t k = 0; k < dim; ++k) std::swap(hess[col * dim + k], hess[piv * dim + k]);
                std::swap(step[col], step[piv]);
            }
            double d = hess[col * dim + col];
            for (size_t r = col + 1; r < dim; ++r) {
                double f = hess[r * dim + col] / d;
                for (size_t k = col; k < dim; ++k) hess[r * dim + k] -= f * hess[col * dim + k];
                step[r] -= f * step[col];
            }
        }
        for (int r = static_cast<int>(dim) - 1; r >= 0; --r) {
            for (size_t k = r + 1; k < dim; ++k) step[r] -= hess[r * dim + k] * step[k];
            step[r] /= hess[r * dim + r];
        }
        double delta = 0.0;
        for (size_t j = 0; j < dim; ++j) {
            theta[j] -= step[j];
            delta = std::max(delta, std::fabs(step[j]));
        }
        if (delta < 1e-10) break;
    }
    return theta;
}

inline double mean_label(const std::vector<int>& labels) {
    double s = 0.0;
    for (int y : labels) s += y;
    return s / static_cast<double>(labels.size());
}

}  // namespace detail

inline Calibrator fit_temperature(const std::vector<double>& conf, const std::vector<int>& labels) {
    std::vector<double> z;
    z.reserve(conf.size());
    for (double p : conf) z.push_back(logit(p));
    auto nll_at = [&](double log_t) {
        double t = std::exp(log_t);
        std::vector<double> q;
        q.reserve(z.size());
        for (double v : z) q.push_back(sigmoid(v / t));
        return detail::nll_of(q, labels);
    };
    const double lo = std::log(0.05), hi = std::log(50.0);
    const int grid = 512;
    int best = 0;
    double best_nll = nll_at(lo);
    for (int i = 1; i < grid; ++i) {
        double v = nll_at(lo + (hi - lo) * i / (grid - 1));
        if (v < best_nll) {
            best_nll = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / (grid - 1);
    double b = lo + (hi - lo) * std::min(grid - 1, best + 1) / (grid - 1);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = nll_at(x1), f2 = nll_at(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = nll_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = nll_at(x2);
        }
    }
    Calibrator c;
    c.method = CalibratorMethod::kTemperature;
    c.fit_samples = conf.size();
    c.temperature = std::exp(0.5 * (a + b));
    return c;
}

inline Calibrator fit_platt(const std::vector<double>& conf, const std::vector<int>& labels) {
    std::vector<std::vector<double>> feats;
    feats.reserve(conf.size());
    for (double p : conf) feats.push_back({logit(p), 1.0});
    std::vector<double> theta = detail::logistic_newton(feats, labels, {1.0, 0.0});
    Calibrator c;
    c.method = CalibratorMethod::kPlatt;
    c.fit_samples = conf.size();
    if (theta[0] < 0.0) {
        // Slope constrained to keep the map monotone; the best constant model
        // is the label rate.
        c.platt_a = 0.0;
        c.platt_b = logit(std::clamp(detail::mean_label(labels), 1e-12, 1.0 - 1e-12));
    } else {
        c.platt_a = theta[0];
        c.platt_b = theta[1];
    }
    return c;
}

inline Calibrator fit_beta(const std::vector<double>& conf, const std::vector<int>& labels) {
    auto feature_row = [](double p) {
        double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
        return std::vector<double>{std::log(q), -std::log(1.0 - q), 1.0};
    };
    std::vector<std::vector<double>> feats;
    feats.reserve(conf.size());
    for (double p : conf) feats.push_back(feature_row(p));
    std::vector<double> theta = detail::logistic_newton(feats, labels, {1.0, 1.0, 0.0});

    // Nonnegativity: drop an offending coefficient and refit the rest.
    bool drop_a = theta[0] < 0.0, drop_b = theta[1] < 0.0;
    if (drop_a || drop_b) {
        if (drop_a && drop_b) {
            theta = {0.0, 0.0, logit(std::clamp(detail::mean_label(labels), 1e-12, 1.0 - 1e-12))};
        } else {
            int keep = drop_a ? 1 : 0;
            std::vector<std::vector<double>> sub;
            sub.reserve(feats.size());
            for (const auto& f : feats) sub.push_back({f[keep], 1.0});
            std::vector<double> t2 = detail::logistic_newton(sub, labels, {1.0, 0.0});
            if (t2[0] < 0.0)
                theta = {0.0, 0.0,
                         logit(std::clamp(detail::mean_label(labels), 1e-12, 1.0 - 1e-12))};
            else if (drop_a)
                theta = {0.0, t2[0], t2[1]};
            else
                theta = {t2[0], 0.0, t2[1]};
        }
    }
    Calibrator c;
    c.method = CalibratorMethod::kBeta;
    c.fit_samples = conf.size();
    c.beta_a = theta[0];
    c.beta_b = theta[1];
    c.beta_c = theta[2];
    return c;
}

inline Calibrator fit_histogram(const std::vector<double>& conf, const std::vector<int>& labels,
                                int bins = 10) {
    std::vector<double> sorted = conf;
    std::sort(sorted.begin(), sorted.end());
    Calibrator c;
    c.method = CalibratorMethod::kHistogram;
    c.fit_samples = conf.size();
    c.bin_edges = detail::equal_frequency_edges(std::move(sorted), bins);
    int nb = static_cast<int>(c.bin_edges.size()) - 1;
    std::vector<double> pos(nb, 0.0);
    std::vector<int> cnt(nb, 0);
    for (size_t i = 0; i < conf.size(); ++i) {
        int b = detail::lookup_bin(c.bin_edges, conf[i]);
        pos[b] += labels[i];
        cnt[b] += 1;
    }
    double global = detail::mean_label(labels);
    c.bin_values.resize(nb);
    for (int b = 0; b < nb; ++b) c.bin_values[b] = cnt[b] > 0 ? pos[b] / cnt[b] : global;
    return c;
}

inline Calibrator fit_isotonic(const std::vector<double>& conf, const std::vector<int>& labels) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(conf.size());
    for (size_t i = 0; i < conf.size(); ++i) pts.push_back({conf[i], double(labels[i])});
    std::sort(pts.begin(), pts.end());

    // Average duplicated x first so the fit is a function of x.
    std::vector<double> xs, ys, ws;
    for (size_t i = 0; i < pts.size();) {
        size_t j = i;
        double sum = 0.0;
        while (j < pts.size() && pts[j].first == pts[i].first) sum += pts[j++].second;
        xs.push_back(pts[i].first);
        ys.push_back(sum / (j - i));
        ws.push_back(static_cast<double>(j - i));
        i = j;
    }

    // Pool adjacent violators with weights.
    std::vector<double> level_y, level_w;
    std::vector<int> level_len;
    for (size_t i = 0; i < xs.size(); ++i) {
        level_y.push_back(ys[i]);
        level_w.push_back(ws[i]);
        level_len.push_back(1);
        while (level_y.size() >= 2 && level_y[level_y.size() - 2] > level_y.back() + 1e-15) {
            double w2 = level_w.back(), y2 = level_y.back();
            int l2 = level_len.back();
            level_y.pop_back();
            level_w.pop_back();
            level_len.pop_back();
            double w1 = level_w.back(), y1 = level_y.back();
            level_y.back() = (w1 * y1 + w2 * y2) / (w1 + w2);
            level_w.back() = w1 + w2;
            level_len.back() += l2;
        }
    }
    Calibrator c;
    c.method = CalibratorMethod::kIsotonic;
    c.fit_samples = conf.size();
    size_t k = 0;
    for (size_t blk = 0; blk < level_y.size(); ++blk)
        for (int r = 0; r < level_len[blk]; ++r, ++k) {
            c.iso_x.push_back(xs[k]);
            c.iso_y.push_back(level_y[blk]);
        }
    return c;
}

inline Calibrator fit_bbq(const std::vector<double>& conf, const std::vector<int>& labels) {
    Calibrator c;
    c.method = CalibratorMethod::kBbq;
    c.fit_samples = conf.size();
    double n13 = std::cbrt(static_cast<double>(conf.size()));
    int lo = std::max(1, static_cast<int>(std::ceil(n13 / 2.0)));
    int hi = std::max(lo, static_cast<int>(std::ceil(2.0 * n13)));
    std::vector<double> sorted = conf;
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> log_ev;
    for (int bins = lo; bins <= hi; ++bins) {
        BbqScheme s;
        s.edges = detail::equal_frequency_edges(sorted, bins);
        int nb = static_cast<int>(s.edges.size()) - 1;
        std::vector<double> n1(nb, 0.0), n0(nb, 0.0);
        for (size_t i = 0; i < conf.size(); ++i) {
            int b = detail::lookup_bin(s.edges, conf[i]);
            (labels[i] ? n1 : n0)[b] += 1.0;
        }
        double ev = 0.0;
        s.rates.resize(nb);
        for (int b = 0; b < nb; ++b) {
            // Beta(1,1) prior: marginal likelihood n1! n0! / (n+1)!,
            // posterior mean (n1+1)/(n+2).
            ev += std::lgamma(n1[b] + 1.0) + std::lgamma(n0[b] + 1.0) -
                  std::lgamma(n1[b] + n0[b] + 2.0);
            s.rates[b] = (n1[b] + 1.0) / (n1[b] + n0[b] + 2.0);
        }
        log_ev.push_back(ev);
        c.bbq_schemes.push_back(std::move(s));
    }
    double mx = *std::max_element(log_ev.begin(), log_ev.end());
    double total = 0.0;
    for (double& e : log_ev) {
        e = std::exp(e - mx);
        total += e;
    }
    for (size_t m = 0; m < log_ev.size(); ++m) c.bbq_schemes[m].weight = log_ev[m] / total;
    return c;
}

inline Calibrator fit_calibrator(CalibratorMethod method, const std::vector<double>& conf,
                                 const std::vector<int>& labels) {
    if (conf.empty()) throw ValidationError("fit_calibrator: empty fit sample");
    if (conf.size() != labels.size())
        throw ValidationError("fit_calibrator: confidences and labels differ in length");
    for (double p : conf)
        if (!(p > 0.0 && p < 1.0))
            throw ValidationError("fit_calibrator: confidence outside (0,1)");
    bool any_pos = false, any_neg = false;
    for (int y : labels) (y != 0 ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg)
        throw ValidationError("fit_calibrator: cannot fit on single-class labels");
    switch (method) {
        case CalibratorMethod::kTemperature: return fit_temperature(conf, labels);
        case CalibratorMethod::kPlatt: return fit_platt(conf, labels);
        case CalibratorMethod::kBeta: return fit_beta(conf, labels);
        case CalibratorMethod::kHistogram: return fit_histogram(conf, labels);
        case CalibratorMethod::kIsotonic: return fit_isotonic(conf, labels);
        case CalibratorMethod::kBbq: return fit_bbq(conf, labels);
    }
    throw ConfigError("unknown calibrator method enum value");
}

inline double apply_calibrator(const Calibrator& c, double p) {
    switch (c.method) {
        case CalibratorMethod::kTemperature:
            return sigmoid(logit(p) / c.temperature);
        case CalibratorMethod::kPlatt:
            return sigmoid(c.platt_a * logit(p) + c.platt_b);
        case CalibratorMethod::kBeta: {
            double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
            return sigmoid(c.beta_a * std::log(q) - c.beta_b * std::log(1.0 - q) + c.beta_c);
        }
        case CalibratorMethod::kHistogram: {
            if (c.bin_edges.size() < 2) throw NotFittedError("histogram calibrator has no bins");
            return c.bin_values[detail::lookup_bin(c.bin_edges, p)];
        }
        case CalibratorMethod::kIsotonic: {
            if (c.iso_x.empty()) throw NotFittedError("isotonic calibrator has no points");
            if (p <= c.iso_x.front()) return c.iso_y.front();
            if (p >= c.iso_x.back()) return c.iso_y.back();
            auto it = std::upper_bound(c.iso_x.begin(), c.iso_x.end(), p);
            size_t j = static_cast<size_t>(it - c.iso_x.begin());
            double x0 = c.iso_x[j - 1], x1 = c.iso_x[j];
            double t = (p - x0) / (x1 - x0);
            return c.iso_y[j - 1] + t * (c.iso_y[j] - c.iso_y[j - 1]);
        }
        case CalibratorMethod::kBbq: {
            if (c.bbq_schemes.empty()) throw NotFittedError("bbq calibrator has no schemes");
            double out = 0.0;
            for (const BbqScheme& s : c.bbq_schemes)
                out += s.weight * s.rates[detail::lookup_bin(s.edges, p)];
            return out;
        }
    }
    throw ConfigError("unknown calibrator method enum value");
}

inline std::vector<double> apply_calibrator(const Calibrator& c, const std::vector<double>& ps) {
    std::vector<double> out;
    out.reserve(ps.size());
    for (double p : ps) out.push_back(std::clamp(apply_calibrator(c, p), 0.0, 1.0));
    return out;
}

// ---------------------------------------------------------------------------
// Adaptive ensemble weighting
// ---------------------------------------------------------------------------

struct WeightedCombination {
    std::vector<double> alpha;  // sums to 1; negatives allowed
    double p = 0.0;             // clamped to [0,1]
    bool clamped = false;
};

// Core weighting rule for any method count; the six-method ensemble op sits
// on top of this.
inline WeightedCombination weighted_combination(const std::vector<double>& delta_ece,
                                                const std::vector<double>& outputs) {
    if (delta_ece.empty() || delta_ece.size() != outputs.size())
        throw ValidationError("weighted_combination: delta/outputs size mismatch");
    WeightedCombination wc;
    double total = 0.0;
    for (double d : delta_ece) total += d;
    size_t n = delta_ece.size();
    wc.alpha.resize(n);
    if (std::fabs(total) < 1e-6) {
        for (size_t i = 0; i < n; ++i) wc.alpha[i] = 1.0 / static_cast<double>(n);
    } else {
        for (size_t i = 0; i < n; ++i) wc.alpha[i] = delta_ece[i] / total;
    }
    double raw = 0.0;
    for (size_t i = 0; i < n; ++i) raw += wc.alpha[i] * outputs[i];
    wc.p = std::clamp(raw, 0.0, 1.0);
    wc.clamped = wc.p != raw;
    return wc;
}

inline WeightedCombination adaptive_weighting(const std::vector<double>& delta_ece,
                                              const std::vector<double>& outputs) {
    if (delta_ece.size() != 6 || outputs.size() != 6)
        throw ValidationError("adaptive_weighting: exactly six methods per branch required");
    return weighted_combination(delta_ece, outputs);
}

// Per-branch calibration bundle: stats, six fitted calibrators, weights.
struct BranchCalibration {
    ConfidenceStats stats;
    std::vector<Calibrator> calibrators;  // one per method, fixed order
    std::vector<double> delta_ece;        // validation ECE_uncal - ECE_method
    std::vector<double> alpha;
    double ece_uncalibrated_val = 0.0;

    // Calibrated ensemble probability for one raw branch output.
    double calibrate(double raw, bool* clamped = nullptr) const {
        if (calibrators.size() != 6 || alpha.size() != 6)
            throw NotFittedError("branch calibration incomplete");
        double conf = confidence_from_raw(raw, stats);
        std::vector<double> outs;
        outs.reserve(6);
        for (const Calibrator& c : calibrators)
            outs.push_back(std::clamp(apply_calibrator(c, conf), 0.0, 1.0));
        WeightedCombination wc = adaptive_weighting(delta_ece, outs);
        if (clamped) *clamped = wc.clamped;
        return wc.p;
    }
};

// Fit everything on the validation split: stats, calibrators, delta ECE and
// the adaptive weights.
inline BranchCalibration fit_branch_calibration(const std::vector<double>& val_raw,
                                                const std::vector<int>& val_labels,
                                                int ece_bins = 10) {
    if (val_raw.size() != val_labels.size())
        throw ValidationError("fit_branch_calibration: raw/labels size mismatch");
    BranchCalibration bc;
    bc.stats = fit_confidence_stats(val_raw);
    std::vector<double> conf = confidence_from_raw(val_raw, bc.stats);
    bc.ece_uncalibrated_val = compute_ece(conf, val_labels, ece_bins);
    for (CalibratorMethod m : all_calibrator_methods()) {
        Calibrator c = fit_calibrator(m, conf, val_labels);
        double ece = compute_ece(apply_calibrator(c, conf), val_labels, ece_bins);
        bc.delta_ece.push_back(bc.ece_uncalibrated_val - ece);
        bc.calibrators.push_back(std::move(c));
    }
    std::vector<double> dummy(6, 0.0);
    bc.alpha = adaptive_weighting(bc.delta_ece, dummy).alpha;
    return bc;
}

}  // namespace dbg4eth
