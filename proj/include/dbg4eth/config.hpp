#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dbg4eth/common.hpp"

namespace dbg4eth {

struct PipelineConfig {
    std::string transactions_path;
    std::string labels_path;
    std::string out_dir;
    std::string checkpoint_dir;  // evaluate-mode artifact source; empty means out_dir
    uint64_t seed = 17;

    int sample_k = 2000;
    int sample_hops = 2;
    int ldg_T = 10;

    double split_train = 0.70;
    double split_val = 0.15;
    double split_test = 0.15;
    int unlabeled_centers = 100;

    int gsg_hidden = 128;
    int gsg_layers = 2;
    double gsg_tau = 0.5;
    double gsg_lambda = 0.5;
    double aug_view1_p_edge = 0.3;
    double aug_view1_p_feature = 0.1;
    double aug_view2_p_edge = 0.4;
    double aug_view2_p_feature = 0.0;
    std::string aug_centrality = "degree";

    int ldg_hidden = 64;
    double ldg_pool_rate = 0.1;
    int ldg_pool_levels = 2;
    int ldg_cluster_cap = 64;

    int calib_bins = 10;

    std::string clf_kind = "boosted_trees";
    int clf_trees = 100;
    int clf_depth = 3;
    double clf_eta = 0.1;

    int train_epochs = 100;
    int train_patience = 10;
    int train_batch = 32;
    std::vector<double> lr_grid{0.1, 0.05, 0.01, 0.005, 0.001};

    // Optional classifier-level train-size sweep; empty disables it.
    std::vector<double> sweep_train_fractions;
};

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing chars");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + v);
    }
}

inline int config_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing chars");
        return static_cast<int>(n);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not an integer: " + v);
    }
}

inline std::vector<double> config_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const std::string& part : split(v, ',')) {
        std::string t{trim(part)};
        if (t.empty()) continue;
        out.push_back(config_double(key, t));
    }
    return out;
}

}  // namespace detail

inline void validate_config(const PipelineConfig& c) {
    double sum = c.split_train + c.split_val + c.split_test;
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("config: split fractions must sum to 1");
    if (c.split_train <= 0.0 || c.split_val < 0.0 || c.split_test < 0.0)
        throw ConfigError("config: split fractions must be non-negative with train > 0");
    auto positive = [](const char* k, double v) {
        if (v <= 0.0) throw ConfigError(std::string("config: ") + k + " must be positive");
    };
    positive("sample.k", c.sample_k);
    positive("sample.hops", c.sample_hops);
    positive("ldg.T", c.ldg_T);
    positive("gsg.hidden", c.gsg_hidden);
    positive("gsg.layers", c.gsg_layers);
    positive("gsg.tau", c.gsg_tau);
    positive("ldg.hidden", c.ldg_hidden);
    positive("ldg.pool_rate", c.ldg_pool_rate);
    positive("ldg.pool_levels", c.ldg_pool_levels);
    positive("ldg.cluster_cap", c.ldg_cluster_cap);
    positive("calib.bins", c.calib_bins);
    positive("clf.trees", c.clf_trees);
    positive("clf.depth", c.clf_depth);
    positive("clf.eta", c.clf_eta);
    positive("train.epochs", c.train_epochs);
    positive("train.patience", c.train_patience);
    positive("train.batch", c.train_batch);
    if (c.gsg_lambda < 0.0) throw ConfigError("config: gsg.lambda must be >= 0");
    if (c.unlabeled_centers < 0) throw ConfigError("config: ingest.unlabeled_centers must be >= 0");
    if (c.ldg_pool_rate > 1.0) throw ConfigError("config: ldg.pool_rate must be in (0,1]");
    for (double p : {c.aug_view1_p_edge, c.aug_view1_p_feature, c.aug_view2_p_edge,
                     c.aug_view2_p_feature})
        if (p < 0.0 || p > 1.0) throw ConfigError("config: augmentation probabilities in [0,1]");
    if (c.aug_centrality != "degree" && c.aug_centrality != "eigenvector" &&
        c.aug_centrality != "pagerank")
        throw ConfigError("config: unknown centrality " + c.aug_centrality);
    if (c.clf_kind != "boosted_trees" && c.clf_kind != "mlp" && c.clf_kind != "logistic")
        throw ConfigError("config: unknown classifier kind " + c.clf_kind);
    if (c.lr_grid.empty()) throw ConfigError("config: train.lr_grid must be non-empty");
    for (double lr : c.lr_grid)
        if (lr <= 0.0) throw ConfigError("config: learning rates must be positive");
    for (double f : c.sweep_train_fractions)
        if (f <= 0.0 || f > 1.0)
            throw ConfigError("config: sweep.train_fractions must lie in (0,1]");
}

inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"paths.transactions", [&](const std::string&, const std::string& v) { c.transactions_path = v; }},
        {"paths.labels", [&](const std::string&, const std::string& v) { c.labels_path = v; }},
        {"paths.out", [&](const std::string&, const std::string& v) { c.out_dir = v; }},
        {"paths.checkpoint",
         [&](const std::string&, const std::string& v) { c.checkpoint_dir = v; }},
        {"seed",
         [&](const std::string& k, const std::string& v) {
             long n = detail::config_int(k, v);
             if (n < 0) throw ConfigError("config: seed must be >= 0");
             c.seed = static_cast<uint64_t>(n);
         }},
        {"sample.k", [&](const std::string& k, const std::string& v) { c.sample_k = detail::config_int(k, v); }},
        {"sample.hops", [&](const std::string& k, const std::string& v) { c.sample_hops = detail::config_int(k, v); }},
        {"ldg.T", [&](const std::string& k, const std::string& v) { c.ldg_T = detail::config_int(k, v); }},
        {"split.train", [&](const std::string& k, const std::string& v) { c.split_train = detail::config_double(k, v); }},
        {"split.val", [&](const std::string& k, const std::string& v) { c.split_val = detail::config_double(k, v); }},
        {"split.test", [&](const std::string& k, const std::string& v) { c.split_test = detail::config_double(k, v); }},
        {"ingest.unlabeled_centers",
         [&](const std::string& k, const std::string& v) { c.unlabeled_centers = detail::config_int(k, v); }},
        {"gsg.hidden", [&](const std::string& k, const std::string& v) { c.gsg_hidden = detail::config_int(k, v); }},
        {"gsg.layers", [&](const std::string& k, const std::string& v) { c.gsg_layers = detail::config_int(k, v); }},
        {"gsg.tau", [&](const std::string& k, const std::string& v) { c.gsg_tau = detail::config_double(k, v); }},
        {"gsg.lambda", [&](const std::string& k, const std::string& v) { c.gsg_lambda = detail::config_double(k, v); }},
        {"gsg.aug.view1.p_edge",
         [&](const std::string& k, const std::string& v) { c.aug_view1_p_edge = detail::config_double(k, v); }},
        {"gsg.aug.view1.p_feature",
         [&](const std::string& k, const std::string& v) { c.aug_view1_p_feature = detail::config_double(k, v); }},
        {"gsg.aug.view2.p_edge",
         [&](const std::string& k, const std::string& v) { c.aug_view2_p_edge = detail::config_double(k, v); }},
        {"gsg.aug.view2.p_feature",
         [&](const std::string& k, const std::string& v) { c.aug_view2_p_feature = detail::config_double(k, v); }},
        {"gsg.aug.centrality", [&](const std::string&, const std::string& v) { c.aug_centrality = v; }},
        {"ldg.hidden", [&](const std::string& k, const std::string& v) { c.ldg_hidden = detail::config_int(k, v); }},
        {"ldg.pool_rate",
         [&](const std::string& k, const std::string& v) { c.ldg_pool_rate = detail::config_double(k, v); }},
        {"ldg.pool_levels",
         [&](const std::string& k, const std::string& v) { c.ldg_pool_levels = detail::config_int(k, v); }},
        {"ldg.cluster_cap",
         [&](const std::string& k, const std::string& v) { c.ldg_cluster_cap = detail::config_int(k, v); }},
        {"calib.bins", [&](const std::string& k, const std::string& v) { c.calib_bins = detail::config_int(k, v); }},
        {"clf.kind", [&](const std::string&, const std::string& v) { c.clf_kind = v; }},
        {"clf.trees", [&](const std::string& k, const std::string& v) { c.clf_trees = detail::config_int(k, v); }},
        {"clf.depth", [&](const std::string& k, const std::string& v) { c.clf_depth = detail::config_int(k, v); }},
        {"clf.eta", [&](const std::string& k, const std::string& v) { c.clf_eta = detail::config_double(k, v); }},
        {"train.epochs", [&](const std::string& k, const std::string& v) { c.train_epochs = detail::config_int(k, v); }},
        {"train.patience",
         [&](const std::string& k, const std::string& v) { c.train_patience = detail::config_int(k, v); }},
        {"train.batch", [&](const std::string& k, const std::string& v) { c.train_batch = detail::config_int(k, v); }},
        {"train.lr_grid",
         [&](const std::string& k, const std::string& v) { c.lr_grid = detail::config_double_list(k, v); }},
        {"sweep.train_fractions",
         [&](const std::string& k, const std::string& v) {
             c.sweep_train_fractions = detail::config_double_list(k, v);
         }},
    };

    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t{trim(line)};
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        std::string key{trim(t.substr(0, eq))};
        std::string value{trim(t.substr(eq + 1))};
        auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " + key);
        if (!seen.insert(key).second)
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
        it->second(key, value);
    }
    validate_config(c);
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

}  // namespace dbg4eth
