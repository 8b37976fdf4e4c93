#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "dbg4eth/calibration.hpp"
#include "dbg4eth/classifier.hpp"
#include "dbg4eth/gsg.hpp"
#include "dbg4eth/ldg.hpp"

namespace dbg4eth {

inline constexpr const char* kCheckpointVersion = "dbg4eth-checkpoint v1";

using json = nlohmann::json;

inline json mat_to_json(const Mat& m) {
    return json{{"r", m.rows}, {"c", m.cols}, {"a", m.a}};
}

inline Mat mat_from_json(const json& j) {
    Mat m(j.at("r").get<int>(), j.at("c").get<int>());
    auto vals = j.at("a").get<std::vector<double>>();
    if (vals.size() != m.a.size()) throw ValidationError("checkpoint matrix: size mismatch");
    m.a = std::move(vals);
    return m;
}

// ---------------------------------------------------------------------------
// GSG
// ---------------------------------------------------------------------------

inline json gsg_config_to_json(const GsgConfig& c) {
    return json{{"hidden", c.hidden},
                {"layers", c.layers},
                {"leaky_slope", c.leaky_slope},
                {"lambda_contrastive", c.lambda_contrastive},
                {"tau", c.tau},
                {"aug",
                 {{"view1", {{"p_edge", c.aug.view1.p_edge}, {"p_feature", c.aug.view1.p_feature}}},
                  {"view2", {{"p_edge", c.aug.view2.p_edge}, {"p_feature", c.aug.view2.p_feature}}},
                  {"centrality", centrality_name(c.aug.centrality)}}}};
}

inline GsgConfig gsg_config_from_json(const json& j) {
    GsgConfig c;
    c.hidden = j.at("hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.lambda_contrastive = j.at("lambda_contrastive").get<double>();
    c.tau = j.at("tau").get<double>();
    const json& a = j.at("aug");
    c.aug.view1 = {a.at("view1").at("p_edge").get<double>(),
                   a.at("view1").at("p_feature").get<double>()};
    c.aug.view2 = {a.at("view2").at("p_edge").get<double>(),
                   a.at("view2").at("p_feature").get<double>()};
    c.aug.centrality = centrality_from_name(a.at("centrality").get<std::string>());
    return c;
}

inline json gsg_model_to_json(const GsgModel& m) {
    const GsgParameters& p = m.parameters();
    json layers = json::array();
    for (size_t l = 0; l < p.W_attn.size(); ++l)
        layers.push_back(json{{"theta_left", mat_to_json(p.theta_left[l])},
                              {"theta_right", mat_to_json(p.theta_right[l])},
                              {"W_attn", mat_to_json(p.W_attn[l])}});
    return json{{"version", kCheckpointVersion},
                {"kind", "gsg"},
                {"config", gsg_config_to_json(m.config())},
                {"params",
                 {{"W_align", mat_to_json(p.W_align)},
                  {"layers", layers},
                  {"theta_s_left", mat_to_json(p.theta_s_left)},
                  {"theta_s_right", mat_to_json(p.theta_s_right)},
                  {"W_read", mat_to_json(p.W_read)},
                  {"w_head", mat_to_json(p.w_head)},
                  {"b_head", mat_to_json(p.b_head)}}}};
}

inline GsgModel gsg_model_from_json(const json& j) {
    GsgConfig cfg = gsg_config_from_json(j.at("config"));
    GsgParameters p;
    const json& jp = j.at("params");
    p.W_align = mat_from_json(jp.at("W_align"));
    for (const json& jl : jp.at("layers")) {
        p.theta_left.push_back(mat_from_json(jl.at("theta_left")));
        p.theta_right.push_back(mat_from_json(jl.at("theta_right")));
        p.W_attn.push_back(mat_from_json(jl.at("W_attn")));
    }
    p.theta_s_left = mat_from_json(jp.at("theta_s_left"));
    p.theta_s_right = mat_from_json(jp.at("theta_s_right"));
    p.W_read = mat_from_json(jp.at("W_read"));
    p.w_head = mat_from_json(jp.at("w_head"));
    p.b_head = mat_from_json(jp.at("b_head"));
    return GsgModel(cfg, std::move(p), true);
}

// ---------------------------------------------------------------------------
// LDG
// ---------------------------------------------------------------------------

inline json ldg_config_to_json(const LdgConfig& c) {
    return json{{"hidden", c.hidden},
                {"pool_rate", c.pool_rate},
                {"pool_levels", c.pool_levels},
                {"cluster_cap", c.cluster_cap}};
}

inline LdgConfig ldg_config_from_json(const json& j) {
    LdgConfig c;
    c.hidden = j.at("hidden").get<int>();
    c.pool_rate = j.at("pool_rate").get<double>();
    c.pool_levels = j.at("pool_levels").get<int>();
    c.cluster_cap = j.at("cluster_cap").get<int>();
    return c;
}

inline json ldg_model_to_json(const LdgModel& m) {
    const LdgParameters& p = m.parameters();
    json pools = json::array();
    for (const Mat& w : p.W_pool) pools.push_back(mat_to_json(w));
    return json{{"version", kCheckpointVersion},
                {"kind", "ldg"},
                {"config", ldg_config_to_json(m.config())},
                {"params",
                 {{"W_in", mat_to_json(p.W_in)},
                  {"W_gcn", mat_to_json(p.W_gcn)},
                  {"W_u", mat_to_json(p.gru.W_u)},
                  {"V_u", mat_to_json(p.gru.V_u)},
                  {"W_r", mat_to_json(p.gru.W_r)},
                  {"V_r", mat_to_json(p.gru.V_r)},
                  {"W_h", mat_to_json(p.gru.W_h)},
                  {"V_h", mat_to_json(p.gru.V_h)},
                  {"W_pool", pools},
                  {"alpha", mat_to_json(p.alpha)},
                  {"theta_g", mat_to_json(p.theta_g)},
                  {"b_g", mat_to_json(p.b_g)},
                  {"w_link", mat_to_json(p.w_link)},
                  {"b_link", mat_to_json(p.b_link)}}}};
}

inline LdgModel ldg_model_from_json(const json& j) {
    LdgConfig cfg = ldg_config_from_json(j.at("config"));
    LdgParameters p;
    const json& jp = j.at("params");
    p.W_in = mat_from_json(jp.at("W_in"));
    p.W_gcn = mat_from_json(jp.at("W_gcn"));
    p.gru.W_u = mat_from_json(jp.at("W_u"));
    p.gru.V_u = mat_from_json(jp.at("V_u"));
    p.gru.W_r = mat_from_json(jp.at("W_r"));
    p.gru.V_r = mat_from_json(jp.at("V_r"));
    p.gru.W_h = mat_from_json(jp.at("W_h"));
    p.gru.V_h = mat_from_json(jp.at("V_h"));
    for (const json& jw : jp.at("W_pool")) p.W_pool.push_back(mat_from_json(jw));
    p.alpha = mat_from_json(jp.at("alpha"));
    p.theta_g = mat_from_json(jp.at("theta_g"));
    p.b_g = mat_from_json(jp.at("b_g"));
    p.w_link = mat_from_json(jp.at("w_link"));
    p.b_link = mat_from_json(jp.at("b_link"));
    return LdgModel(cfg, std::move(p), true);
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

inline json calibrator_to_json(const Calibrator& c) {
    json j{{"method", calibrator_method_name(c.method)}, {"fit_samples", c.fit_samples}};
    switch (c.method) {
        case CalibratorMethod::kTemperature: j["temperature"] = c.temperature; break;
        case CalibratorMethod::kPlatt:
            j["a"] = c.platt_a;
            j["b"] = c.platt_b;
            break;
        case CalibratorMethod::kBeta:
            j["a"] = c.beta_a;
            j["b"] = c.beta_b;
            j["c"] = c.beta_c;
            break;
        case CalibratorMethod::kHistogram:
            j["edges"] = c.bin_edges;
            j["values"] = c.bin_values;
            break;
        case CalibratorMethod::kIsotonic:
            j["x"] = c.iso_x;
            j["y"] = c.iso_y;
            break;
        case CalibratorMethod::kBbq: {
            json schemes = json::array();
            for (const BbqScheme& s : c.bbq_schemes)
                schemes.push_back(
                    json{{"edges", s.edges}, {"rates", s.rates}, {"weight", s.weight}});
            j["schemes"] = schemes;
            break;
        }
    }
    return j;
}

inline Calibrator calibrator_from_json(const json& j) {
    Calibrator c;
    c.method = calibrator_method_from_name(j.at("method").get<std::string>());
    c.fit_samples = j.at("fit_samples").get<size_t>();
    switch (c.method) {
        case CalibratorMethod::kTemperature:
            c.temperature = j.at("temperature").get<double>();
            break;
        case CalibratorMethod::kPlatt:
            c.platt_a = j.at("a").get<double>();
            c.platt_b = j.at("b").get<double>();
            break;
        case CalibratorMethod::kBeta:
            c.beta_a = j.at("a").get<double>();
            c.beta_b = j.at("b").get<double>();
            c.beta_c = j.at("c").get<double>();
            break;
        case CalibratorMethod::kHistogram:
            c.bin_edges = j.at("edges").get<std::vector<double>>();
            c.bin_values = j.at("values").get<std::vector<double>>();
            break;
        case CalibratorMethod::kIsotonic:
            c.iso_x = j.at("x").get<std::vector<double>>();
            c.iso_y = j.at("y").get<std::vector<double>>();
            break;
        case CalibratorMethod::kBbq:
            for (const json& js : j.at("schemes")) {
                BbqScheme s;
                s.edges = js.at("edges").get<std::vector<double>>();
                s.rates = js.at("rates").get<std::vector<double>>();
                s.weight = js.at("weight").get<double>();
                c.bbq_schemes.push_back(std::move(s));
            }
            break;
    }
    return c;
}

inline json branch_calibration_to_json(const BranchCalibration& b) {
    json cals = json::array();
    for (const Calibrator& c : b.calibrators) cals.push_back(calibrator_to_json(c));
    return json{{"stats", {{"mu", b.stats.mu}, {"s", b.stats.s}}},
                {"calibrators", cals},
                {"delta_ece", b.delta_ece},
                {"alpha", b.alpha},
                {"ece_uncalibrated_val", b.ece_uncalibrated_val}};
}

inline BranchCalibration branch_calibration_from_json(const json& j) {
    BranchCalibration b;
    b.stats.mu = j.at("stats").at("mu").get<double>();
    b.stats.s = j.at("stats").at("s").get<double>();
    for (const json& jc : j.at("calibrators")) b.calibrators.push_back(calibrator_from_json(jc));
    b.delta_ece = j.at("delta_ece").get<std::vector<double>>();
    b.alpha = j.at("alpha").get<std::vector<double>>();
    b.ece_uncalibrated_val = j.at("ece_uncalibrated_val").get<double>();
    return b;
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

inline json classifier_to_json(const BinaryClassifier& clf) {
    json j{{"version", kCheckpointVersion}, {"kind", clf.kind()}};
    if (const auto* bt = dynamic_cast<const BoostedTreesClassifier*>(&clf)) {
        j["bias"] = bt->bias();
        j["degenerate"] = bt->degenerate();
        j["trees"] = bt->trees();
        j["depth"] = bt->depth();
        j["eta"] = bt->eta();
        json forest = json::array();
        for (const RegressionTree& t : bt->forest()) {
            json nodes = json::array();
            for (const TreeNode& n : t.nodes)
                nodes.push_back(json::array({n.feature, n.threshold, n.leaf, n.left, n.right}));
            forest.push_back(nodes);
        }
        j["forest"] = forest;
    } else if (const auto* lg = dynamic_cast<const LogisticClassifier*>(&clf)) {
        j["theta"] = lg->coefficients();
        j["degenerate"] = lg->degenerate();
    } else if (const auto* mlp = dynamic_cast<const MlpClassifier*>(&clf)) {
        j["w1"] = mat_to_json(mlp->w1());
        j["b1"] = mat_to_json(mlp->b1());
        j["w2"] = mat_to_json(mlp->w2());
        j["b2"] = mat_to_json(mlp->b2());
    } else {
        throw ConfigError("classifier serialization: unknown concrete type");
    }
    return j;
}

inline std::unique_ptr<BinaryClassifier> classifier_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "boosted_trees") {
        auto clf = std::make_unique<BoostedTreesClassifier>(
            j.at("trees").get<int>(), j.at("depth").get<int>(), j.at("eta").get<double>());
        std::vector<RegressionTree> forest;
        for (const json& jt : j.at("forest")) {
            RegressionTree t;
            for (const json& jn : jt)
                t.nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(),
                                   jn.at(2).get<double>(), jn.at(3).get<int>(),
                                   jn.at(4).get<int>()});
            forest.push_back(std::move(t));
        }
        clf->restore(j.at("bias").get<double>(), j.at("degenerate").get<bool>(),
                     std::move(forest));
        return clf;
    }
    if (kind == "logistic") {
        auto clf = std::make_unique<LogisticClassifier>();
        clf->restore(j.at("theta").get<std::array<double, 3>>(),
                     j.at("degenerate").get<bool>());
        return clf;
    }
    if (kind == "mlp") {
        auto clf = std::make_unique<MlpClassifier>();
        clf->restore(mat_from_json(j.at("w1")), mat_from_json(j.at("b1")),
                     mat_from_json(j.at("w2")), mat_from_json(j.at("b2")));
        return clf;
    }
    throw ConfigError("checkpoint: unknown classifier kind " + kind);
}

// ---------------------------------------------------------------------------
// Checkpoint file IO
// ---------------------------------------------------------------------------

inline void write_checkpoint(const std::string& path, json j) {
    j["version"] = kCheckpointVersion;
    std::ofstream out(path);
    if (!out) throw StageError("cannot write checkpoint: " + path);
    out << j.dump(1) << "\n";
}

inline json read_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("missing checkpoint file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("malformed checkpoint " + path + ": " + e.what());
    }
    if (!j.contains("version") || j.at("version").get<std::string>() != kCheckpointVersion)
        throw ValidationError("checkpoint " + path + ": unsupported version header");
    return j;
}

}  // namespace dbg4eth
