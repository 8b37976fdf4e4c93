#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dbg4eth/config.hpp"
#include "dbg4eth/dataset.hpp"
#include "dbg4eth/metrics.hpp"
#include "dbg4eth/serialize.hpp"

namespace dbg4eth {

enum class PipelineMode { Ingest, Train, Evaluate, Ablate };

inline std::string pipeline_mode_name(PipelineMode m) {
    switch (m) {
        case PipelineMode::Ingest: return "ingest";
        case PipelineMode::Train: return "train";
        case PipelineMode::Evaluate: return "evaluate";
        case PipelineMode::Ablate: return "ablate";
    }
    return "?";
}

inline constexpr const char* kRunManifestVersion = "dbg4eth-run v1";

namespace detail {

inline std::string fmt6(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

// Module errors propagate with a stage prefix but keep their type so the CLI
// exit-code mapping (2 for validation-class, 3 for stage failures) holds.
template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const SchemaError& e) {
        throw SchemaError(stage + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(stage + ": " + e.what());
    } catch (const StageError& e) {
        throw StageError(stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw StageError(stage + ": " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ingest: ledger + labels -> split dataset
// ---------------------------------------------------------------------------

struct IngestResult {
    Dataset dataset;
    std::vector<std::string> types;  // sorted labeled type names
    size_t skipped_rows = 0;
};

inline IngestResult ingest_dataset(const PipelineConfig& cfg) {
    std::ifstream tx_in(cfg.transactions_path);
    if (!tx_in) throw ValidationError("cannot open transactions file: " + cfg.transactions_path);
    ParseResult parsed = parse_transactions(tx_in);
    if (parsed.records.empty())
        throw ValidationError("transactions file has no submitted rows: " + cfg.transactions_path);

    std::ifstream lb_in(cfg.labels_path);
    if (!lb_in) throw ValidationError("cannot open labels file: " + cfg.labels_path);
    std::vector<LabelRecord> labels = parse_labels(lb_in);
    if (labels.empty()) throw ValidationError("labels file is empty: " + cfg.labels_path);

    std::map<std::string, std::string> label_of;
    std::set<std::string> type_set;
    for (const LabelRecord& l : labels) {
        if (l.label_name == "unlabeled")
            throw ValidationError("label name 'unlabeled' is reserved for the negative pool");
        if (!label_of.emplace(l.address, l.label_name).second)
            throw ValidationError("duplicate label for address " + l.address);
        type_set.insert(l.label_name);
    }
    std::vector<std::string> types(type_set.begin(), type_set.end());
    auto type_index = [&](const std::string& name) {
        return static_cast<int>(std::lower_bound(types.begin(), types.end(), name) -
                                types.begin());
    };

    std::map<std::string, int> activity;
    std::set<std::string> contracts;
    for (const TransactionRecord& r : parsed.records) {
        activity[r.sender] += 1;
        activity[r.receiver] += 1;
        if (r.sender_is_contract) contracts.insert(r.sender);
        if (r.receiver_is_contract) contracts.insert(r.receiver);
    }
    for (const auto& [addr, name] : label_of)
        if (!activity.count(addr))
            throw ValidationError("labeled account has no transactions in the ledger: " + addr);

    // Unlabeled negative pool: busiest non-contract, non-labeled accounts.
    std::vector<std::pair<int, std::string>> pool;
    for (const auto& [addr, count] : activity)
        if (!label_of.count(addr) && !contracts.count(addr)) pool.push_back({-count, addr});
    std::sort(pool.begin(), pool.end());
    if (static_cast<int>(pool.size()) > cfg.unlabeled_centers) pool.resize(cfg.unlabeled_centers);

    Dataset ds;
    ds.params = {cfg.sample_k, cfg.sample_hops, cfg.ldg_T};
    auto add_instance = [&](const std::string& center, int label, const std::string& name) {
        SampledSubgraph s = sample_khop(center, parsed.records, cfg.sample_k, cfg.sample_hops);
        DatasetInstance inst;
        inst.static_graph = build_static_subgraph(s, label, name);
        inst.dynamic_graph = build_dynamic_sequence(s, cfg.ldg_T, label, name);
        ds.instances.push_back(std::move(inst));
    };
    for (const auto& [addr, name] : label_of) add_instance(addr, type_index(name), name);
    for (const auto& [neg_count, addr] : pool) {
        (void)neg_count;
        add_instance(addr, -1, "unlabeled");
    }

    // Stratified split per label group, seeded independently of group sizes.
    std::map<std::string, std::vector<int>> groups;
    for (size_t i = 0; i < ds.instances.size(); ++i)
        groups[ds.instances[i].static_graph.label_name].push_back(static_cast<int>(i));
    for (auto& [name, idxs] : groups) {
        Rng rng(derive_seed(cfg.seed, "split." + name));
        rng.shuffle(idxs);
        size_t n = idxs.size();
        size_t n_val = static_cast<size_t>(n * cfg.split_val);
        size_t n_test = static_cast<size_t>(n * cfg.split_test);
        for (size_t j = 0; j < n; ++j) {
            Split s = Split::Train;
            if (j >= n - n_test)
                s = Split::Test;
            else if (j >= n - n_test - n_val)
                s = Split::Val;
            ds.instances[idxs[j]].split = s;
        }
    }
    return {std::move(ds), std::move(types), parsed.skipped.size()};
}

// ---------------------------------------------------------------------------
// Per-type binary task with 1:1 negative sampling
// ---------------------------------------------------------------------------

struct BinaryTask {
    std::string type;
    // Task-local graph copies carrying binary labels; origin tags keep the
    // source split visible to the leak guard.
    std::vector<StaticSubgraph> s_train, s_val, s_test;
    std::vector<DynamicGraphSequence> d_train, d_val, d_test;
    std::vector<Split> origin_train, origin_val, origin_test;
    std::vector<int> y_train, y_val, y_test;
};

inline void leak_guard(const std::vector<Split>& origins, const std::string& where) {
    for (Split s : origins)
        if (s == Split::Test)
            throw StageError("leak guard: test instance reached a fit path in " + where);
}

inline BinaryTask build_binary_task(const Dataset& ds, const std::string& type, uint64_t seed) {
    BinaryTask task;
    task.type = type;
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        std::vector<const DatasetInstance*> pos, neg;
        for (const DatasetInstance& inst : ds.instances) {
            if (inst.split != split) continue;
            (inst.static_graph.label_name == type ? pos : neg).push_back(&inst);
        }
        Rng rng(derive_seed(seed, "neg." + type + "." + split_name(split)));
        rng.shuffle(neg);
        if (neg.size() > pos.size()) neg.resize(pos.size());

        auto* sg = split == Split::Train ? &task.s_train : split == Split::Val ? &task.s_val : &task.s_test;
        auto* dg = split == Split::Train ? &task.d_train : split == Split::Val ? &task.d_val : &task.d_test;
        auto* ys = split == Split::Train ? &task.y_train : split == Split::Val ? &task.y_val : &task.y_test;
        auto* org = split == Split::Train ? &task.origin_train
                    : split == Split::Val ? &task.origin_val
                                          : &task.origin_test;
        auto append = [&](const DatasetInstance* inst, int y) {
            sg->push_back(inst->static_graph);
            sg->back().label = y;
            dg->push_back(inst->dynamic_graph);
            dg->back().label = y;
            ys->push_back(y);
            org->push_back(inst->split);
        };
        for (const DatasetInstance* p : pos) append(p, 1);
        for (const DatasetInstance* n : neg) append(n, 0);
    }
    if (task.y_train.empty())
        throw ValidationError("type " + type + ": no training positives after the split");
    bool val_pos = false, val_neg = false;
    for (int y : task.y_val) (y ? val_pos : val_neg) = true;
    if (!val_pos || !val_neg)
        throw ValidationError("type " + type + ": validation split lacks a class");
    return task;
}

// ---------------------------------------------------------------------------
// Branch training with learning-rate grid selection on validation F1
// ---------------------------------------------------------------------------

inline GsgConfig gsg_config_from(const PipelineConfig& c) {
    GsgConfig g;
    g.hidden = c.gsg_hidden;
    g.layers = c.gsg_layers;
    g.tau = c.gsg_tau;
    g.lambda_contrastive = c.gsg_lambda;
    g.aug.view1 = {c.aug_view1_p_edge, c.aug_view1_p_feature};
    g.aug.view2 = {c.aug_view2_p_edge, c.aug_view2_p_feature};
    g.aug.centrality = centrality_from_name(c.aug_centrality);
    return g;
}

inline LdgConfig ldg_config_from(const PipelineConfig& c) {
    LdgConfig l;
    l.hidden = c.ldg_hidden;
    l.pool_rate = c.ldg_pool_rate;
    l.pool_levels = c.ldg_pool_levels;
    l.cluster_cap = c.ldg_cluster_cap;
    return l;
}

struct BranchSelection {
    double lr = 0.0;
    double val_f1 = 0.0;
};

inline GsgModel train_gsg_grid(const PipelineConfig& cfg, const BinaryTask& task,
                               BranchSelection* sel) {
    leak_guard(task.origin_train, "gsg training");
    leak_guard(task.origin_val, "gsg validation");
    std::vector<const StaticSubgraph*> train, val;
    for (const StaticSubgraph& g : task.s_train) train.push_back(&g);
    for (const StaticSubgraph& g : task.s_val) val.push_back(&g);

    GsgConfig gc = gsg_config_from(cfg);
    uint64_t seed = derive_seed(cfg.seed, "gsg." + task.type);
    GsgModel best_model;
    BranchSelection best{0.0, -1.0};
    for (double lr : cfg.lr_grid) {
        GsgModel model(gc, init_gsg_parameters(gc, seed), false);
        BranchTrainOptions opt;
        opt.epochs = cfg.train_epochs;
        opt.patience = cfg.train_patience;
        opt.batch = cfg.train_batch;
        opt.lr = lr;
        opt.seed = seed;
        BranchTrainResult r = train_gsg(model, train, val, task.y_val, opt);
        if (r.best_val_f1 > best.val_f1 + 1e-12) {
            best = {lr, r.best_val_f1};
            best_model = std::move(model);
        }
    }
    if (sel) *sel = best;
    return best_model;
}

inline LdgModel train_ldg_grid(const PipelineConfig& cfg, const BinaryTask& task,
                               BranchSelection* sel) {
    leak_guard(task.origin_train, "ldg training");
    leak_guard(task.origin_val, "ldg validation");
    std::vector<const DynamicGraphSequence*> train, val;
    for (const DynamicGraphSequence& g : task.d_train) train.push_back(&g);
    for (const DynamicGraphSequence& g : task.d_val) val.push_back(&g);

    LdgConfig lc = ldg_config_from(cfg);
    uint64_t seed = derive_seed(cfg.seed, "ldg." + task.type);
    LdgModel best_model;
    BranchSelection best{0.0, -1.0};
    for (double lr : cfg.lr_grid) {
        LdgModel model(lc, init_ldg_parameters(lc, cfg.ldg_T, seed), false);
        BranchTrainOptions opt;
        opt.epochs = cfg.train_epochs;
        opt.patience = cfg.train_patience;
        opt.batch = cfg.train_batch;
        opt.lr = lr;
        opt.seed = seed;
        BranchTrainResult r = train_ldg(model, train, val, task.y_val, opt);
        if (r.best_val_f1 > best.val_f1 + 1e-12) {
            best = {lr, r.best_val_f1};
            best_model = std::move(model);
        }
    }
    if (sel) *sel = best;
    return best_model;
}

// ---------------------------------------------------------------------------
// Ablation variants over the calibrated ensemble
// ---------------------------------------------------------------------------

// Method index layout in BranchCalibration::calibrators: 0..2 parametric
// (temperature, platt, beta), 3..5 non-parametric (histogram, isotonic, bbq).
enum class AblationKind {
    Full,
    NoGsg,
    NoLdg,
    NoCalibration,
    NoParametric,
    NoNonParametric,
    NoAdaParametric,
    NoAdaNonParametric,
    NoAdaptive,
    MlpClassifier,
};

struct AblationVariant {
    std::string name;
    AblationKind kind;
};

inline const std::vector<AblationVariant>& ablation_variants() {
    static const std::vector<AblationVariant> v{
        {"w/o GSG", AblationKind::NoGsg},
        {"w/o LDG", AblationKind::NoLdg},
        {"w/o calibration", AblationKind::NoCalibration},
        {"w/o Param. calibration", AblationKind::NoParametric},
        {"w/o Non-param. calibration", AblationKind::NoNonParametric},
        {"w/o Ada. Param. calibration", AblationKind::NoAdaParametric},
        {"w/o Ada. Non-param. calibration", AblationKind::NoAdaNonParametric},
        {"w/o Ada. calibration", AblationKind::NoAdaptive},
        {"w/o LightGBM", AblationKind::MlpClassifier},
        {"DBG4ETH", AblationKind::Full},
    };
    return v;
}

namespace detail {

inline std::vector<double> method_outputs(const BranchCalibration& bc, double conf) {
    std::vector<double> outs;
    outs.reserve(bc.calibrators.size());
    for (const Calibrator& c : bc.calibrators)
        outs.push_back(std::clamp(apply_calibrator(c, conf), 0.0, 1.0));
    return outs;
}

inline std::vector<double> subvec(const std::vector<double>& v, int from, int to) {
    return std::vector<double>(v.begin() + from, v.begin() + to);
}

// Group-mean delta: removes within-group adaptivity while preserving the
// group's total mass in the adaptive-weight normalization.
inline std::vector<double> mean_group(std::vector<double> delta, int from, int to) {
    double mean = 0.0;
    for (int i = from; i < to; ++i) mean += delta[i];
    mean /= (to - from);
    for (int i = from; i < to; ++i) delta[i] = mean;
    return delta;
}

inline double branch_probability(const BranchCalibration& bc, double raw, AblationKind kind) {
    double conf = confidence_from_raw(raw, bc.stats);
    if (kind == AblationKind::NoCalibration) return conf;
    std::vector<double> outs = method_outputs(bc, conf);
    switch (kind) {
        case AblationKind::NoParametric:
            return weighted_combination(subvec(bc.delta_ece, 3, 6), subvec(outs, 3, 6)).p;
        case AblationKind::NoNonParametric:
            return weighted_combination(subvec(bc.delta_ece, 0, 3), subvec(outs, 0, 3)).p;
        case AblationKind::NoAdaParametric:
            return weighted_combination(mean_group(bc.delta_ece, 0, 3), outs).p;
        case AblationKind::NoAdaNonParametric:
            return weighted_combination(mean_group(bc.delta_ece, 3, 6), outs).p;
        case AblationKind::NoAdaptive:
            return weighted_combination(std::vector<double>(6, 1.0), outs).p;
        default:
            return adaptive_weighting(bc.delta_ece, outs).p;
    }
}

}  // namespace detail

inline FeaturePair variant_features(AblationKind kind, const BranchCalibration& cal_g,
                                    const BranchCalibration& cal_l, double g_raw, double l_raw) {
    switch (kind) {
        case AblationKind::NoGsg:
            return {0.5, detail::branch_probability(cal_l, l_raw, AblationKind::Full)};
        case AblationKind::NoLdg:
            return {detail::branch_probability(cal_g, g_raw, AblationKind::Full), 0.5};
        default:
            return {detail::branch_probability(cal_g, g_raw, kind),
                    detail::branch_probability(cal_l, l_raw, kind)};
    }
}

// ---------------------------------------------------------------------------
// Per-type training result
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string variant;
    std::string type;
    ClassificationMetrics metrics;
};

struct TypeResult {
    std::string type;
    BinaryTask task;
    GsgModel gsg;
    LdgModel ldg;
    BranchSelection gsg_sel, ldg_sel;
    BranchCalibration cal_g, cal_l;
    std::unique_ptr<BinaryClassifier> clf;

    // Raw branch outputs per task split, aligned with task.y_* vectors.
    std::vector<double> g_train, g_val, g_test, l_train, l_val, l_test;

    ClassificationMetrics metrics;  // full-model test metrics
    double gsg_ece_before = 0.0, gsg_ece_after = 0.0;
    double ldg_ece_before = 0.0, ldg_ece_after = 0.0;
    std::array<double, 6> gsg_method_ece{}, ldg_method_ece{};
};

namespace detail {

inline std::vector<double> gsg_raws(const GsgModel& m, const std::vector<StaticSubgraph>& gs) {
    std::vector<double> out;
    out.reserve(gs.size());
    for (const StaticSubgraph& g : gs) out.push_back(m.predict(g));
    return out;
}

inline std::vector<double> ldg_raws(const LdgModel& m,
                                    const std::vector<DynamicGraphSequence>& gs) {
    std::vector<double> out;
    out.reserve(gs.size());
    for (const DynamicGraphSequence& g : gs) out.push_back(m.predict(g));
    return out;
}

inline std::unique_ptr<BinaryClassifier> fit_variant_classifier(
    const PipelineConfig& cfg, const TypeResult& tr, AblationKind kind,
    const std::vector<double>& g_fit_raw, const std::vector<double>& l_fit_raw,
    const std::vector<int>& y_fit, const std::string& variant_tag) {
    ClassifierOptions copt;
    copt.kind = kind == AblationKind::MlpClassifier ? "mlp" : cfg.clf_kind;
    copt.trees = cfg.clf_trees;
    copt.depth = cfg.clf_depth;
    copt.eta = cfg.clf_eta;
    copt.seed = derive_seed(cfg.seed, "clf." + tr.type + "." + variant_tag);
    std::unique_ptr<BinaryClassifier> clf = make_classifier(copt);
    std::vector<FeaturePair> feats;
    feats.reserve(g_fit_raw.size());
    for (size_t i = 0; i < g_fit_raw.size(); ++i)
        feats.push_back(variant_features(kind, tr.cal_g, tr.cal_l, g_fit_raw[i], l_fit_raw[i]));
    clf->fit(feats, y_fit);
    return clf;
}

inline ClassificationMetrics eval_variant(const TypeResult& tr, const BinaryClassifier& clf,
                                          AblationKind kind) {
    std::vector<int> pred;
    pred.reserve(tr.g_test.size());
    for (size_t i = 0; i < tr.g_test.size(); ++i) {
        FeaturePair f = variant_features(kind, tr.cal_g, tr.cal_l, tr.g_test[i], tr.l_test[i]);
        pred.push_back(predict_account(clf, f).label);
    }
    return compute_metrics(pred, tr.task.y_test);
}

}  // namespace detail

// Train both branches, calibrate on validation, fit the classifier on
// train+validation, evaluate on test.
inline TypeResult train_type(const PipelineConfig& cfg, const Dataset& ds,
                             const std::string& type) {
    TypeResult tr;
    tr.type = type;
    tr.task = build_binary_task(ds, type, cfg.seed);

    tr.gsg = detail::run_stage("train(gsg:" + type + ")",
                               [&] { return train_gsg_grid(cfg, tr.task, &tr.gsg_sel); });
    tr.ldg = detail::run_stage("train(ldg:" + type + ")",
                               [&] { return train_ldg_grid(cfg, tr.task, &tr.ldg_sel); });

    tr.g_train = detail::gsg_raws(tr.gsg, tr.task.s_train);
    tr.g_val = detail::gsg_raws(tr.gsg, tr.task.s_val);
    tr.g_test = detail::gsg_raws(tr.gsg, tr.task.s_test);
    tr.l_train = detail::ldg_raws(tr.ldg, tr.task.d_train);
    tr.l_val = detail::ldg_raws(tr.ldg, tr.task.d_val);
    tr.l_test = detail::ldg_raws(tr.ldg, tr.task.d_test);

    // Calibrators and confidence statistics are fitted on validation only.
    leak_guard(tr.task.origin_val, "calibration fitting");
    tr.cal_g = fit_branch_calibration(tr.g_val, tr.task.y_val, cfg.calib_bins);
    tr.cal_l = fit_branch_calibration(tr.l_val, tr.task.y_val, cfg.calib_bins);

    // Classifier consumes train+validation.
    leak_guard(tr.task.origin_train, "classifier fitting");
    std::vector<double> g_fit = tr.g_train, l_fit = tr.l_train;
    std::vector<int> y_fit = tr.task.y_train;
    g_fit.insert(g_fit.end(), tr.g_val.begin(), tr.g_val.end());
    l_fit.insert(l_fit.end(), tr.l_val.begin(), tr.l_val.end());
    y_fit.insert(y_fit.end(), tr.task.y_val.begin(), tr.task.y_val.end());
    tr.clf = detail::fit_variant_classifier(cfg, tr, AblationKind::Full, g_fit, l_fit, y_fit,
                                            "full");

    tr.metrics = detail::eval_variant(tr, *tr.clf, AblationKind::Full);

    // Branch ECEs on test: before = standardized confidence, after = the
    // adaptive ensemble probability; per-method ECEs feed calibration.csv.
    auto branch_eces = [&](const BranchCalibration& bc, const std::vector<double>& raws,
                           double* before, double* after, std::array<double, 6>* per_method) {
        std::vector<double> conf;
        conf.reserve(raws.size());
        for (double r : raws) conf.push_back(confidence_from_raw(r, bc.stats));
        *before = compute_ece(conf, tr.task.y_test, cfg.calib_bins);
        std::vector<double> ens;
        ens.reserve(raws.size());
        for (double r : raws)
            ens.push_back(detail::branch_probability(bc, r, AblationKind::Full));
        *after = compute_ece(ens, tr.task.y_test, cfg.calib_bins);
        for (int m = 0; m < 6; ++m)
            (*per_method)[m] =
                compute_ece(apply_calibrator(bc.calibrators[m], conf), tr.task.y_test,
                            cfg.calib_bins);
    };
    branch_eces(tr.cal_g, tr.g_test, &tr.gsg_ece_before, &tr.gsg_ece_after, &tr.gsg_method_ece);
    branch_eces(tr.cal_l, tr.l_test, &tr.ldg_ece_before, &tr.ldg_ece_after, &tr.ldg_method_ece);
    return tr;
}

inline std::vector<AblationRow> run_ablations(const PipelineConfig& cfg, TypeResult& tr) {
    std::vector<AblationRow> rows;
    std::vector<double> g_fit = tr.g_train, l_fit = tr.l_train;
    std::vector<int> y_fit = tr.task.y_train;
    g_fit.insert(g_fit.end(), tr.g_val.begin(), tr.g_val.end());
    l_fit.insert(l_fit.end(), tr.l_val.begin(), tr.l_val.end());
    y_fit.insert(y_fit.end(), tr.task.y_val.begin(), tr.task.y_val.end());

    for (const AblationVariant& v : ablation_variants()) {
        ClassificationMetrics m;
        if (v.kind == AblationKind::Full) {
            m = tr.metrics;  // identical split and model by construction
        } else {
            std::unique_ptr<BinaryClassifier> clf = detail::fit_variant_classifier(
                cfg, tr, v.kind, g_fit, l_fit, y_fit, v.name);
            m = detail::eval_variant(tr, *clf, v.kind);
        }
        rows.push_back({v.name, tr.type, m});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct PipelineReport {
    std::vector<std::string> types;
    std::vector<TypeResult> results;
    std::vector<AblationRow> ablation;
    bool complete = false;
    std::string failed_stage;
};

namespace detail {

inline void write_metrics_csv(const std::string& path, const std::vector<TypeResult>& results) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << "account_type,precision,recall,f1,accuracy,precision_zero_division,"
           "gsg_ece_before,gsg_ece_after,ldg_ece_before,ldg_ece_after\n";
    for (const TypeResult& tr : results)
        out << tr.type << ',' << fmt6(tr.metrics.precision) << ',' << fmt6(tr.metrics.recall)
            << ',' << fmt6(tr.metrics.f1) << ',' << fmt6(tr.metrics.accuracy) << ','
            << (tr.metrics.precision_zero_division ? 1 : 0) << ',' << fmt6(tr.gsg_ece_before)
            << ',' << fmt6(tr.gsg_ece_after) << ',' << fmt6(tr.ldg_ece_before) << ','
            << fmt6(tr.ldg_ece_after) << '\n';
}

inline void write_calibration_csv(const std::string& path,
                                  const std::vector<TypeResult>& results) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << "method,branch,ECE_before,ECE_after,delta_ECE,weight,account_type\n";
    for (const TypeResult& tr : results) {
        for (int b = 0; b < 2; ++b) {
            const BranchCalibration& bc = b == 0 ? tr.cal_g : tr.cal_l;
            const std::array<double, 6>& eces = b == 0 ? tr.gsg_method_ece : tr.ldg_method_ece;
            double before = b == 0 ? tr.gsg_ece_before : tr.ldg_ece_before;
            for (int m = 0; m < 6; ++m)
                out << calibrator_method_name(all_calibrator_methods()[m]) << ','
                    << (b == 0 ? "gsg" : "ldg") << ',' << fmt6(before) << ',' << fmt6(eces[m])
                    << ',' << fmt6(bc.delta_ece[m]) << ',' << fmt6(bc.alpha[m]) << ',' << tr.type
                    << '\n';
        }
    }
}

inline void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << "variant,account_type,precision,recall,f1,accuracy\n";
    for (const AblationRow& r : rows)
        out << r.variant << ',' << r.type << ',' << fmt6(r.metrics.precision) << ','
            << fmt6(r.metrics.recall) << ',' << fmt6(r.metrics.f1) << ','
            << fmt6(r.metrics.accuracy) << '\n';
}

inline void write_sweep_csv(const std::string& path, const PipelineConfig& cfg,
                            std::vector<TypeResult>& results) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << "train_fraction,account_type,precision,recall,f1,accuracy\n";
    for (TypeResult& tr : results) {
        for (size_t fi = 0; fi < cfg.sweep_train_fractions.size(); ++fi) {
            double frac = cfg.sweep_train_fractions[fi];
            std::vector<int> order(tr.g_train.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            Rng rng(derive_seed(cfg.seed, "sweep." + tr.type + "." + std::to_string(fi)));
            rng.shuffle(order);
            size_t keep = std::max<size_t>(2, static_cast<size_t>(order.size() * frac));
            keep = std::min(keep, order.size());
            std::vector<double> g_fit, l_fit;
            std::vector<int> y_fit;
            for (size_t i = 0; i < keep; ++i) {
                g_fit.push_back(tr.g_train[order[i]]);
                l_fit.push_back(tr.l_train[order[i]]);
                y_fit.push_back(tr.task.y_train[order[i]]);
            }
            g_fit.insert(g_fit.end(), tr.g_val.begin(), tr.g_val.end());
            l_fit.insert(l_fit.end(), tr.l_val.begin(), tr.l_val.end());
            y_fit.insert(y_fit.end(), tr.task.y_val.begin(), tr.task.y_val.end());
            ClassificationMetrics m;
            try {
                std::unique_ptr<BinaryClassifier> clf = fit_variant_classifier(
                    cfg, tr, AblationKind::Full, g_fit, l_fit, y_fit,
                    "sweep." + std::to_string(fi));
                m = eval_variant(tr, *clf, AblationKind::Full);
            } catch (const ValidationError&) {
                continue;  // fraction too small to form a fit set
            }
            out << fmt6(frac) << ',' << tr.type << ',' << fmt6(m.precision) << ','
                << fmt6(m.recall) << ',' << fmt6(m.f1) << ',' << fmt6(m.accuracy) << '\n';
        }
    }
}

inline void write_run_manifest(const std::string& path, PipelineMode mode,
                               const PipelineConfig& cfg, const std::vector<std::string>& types,
                               std::vector<std::string> artifacts, bool complete,
                               const std::string& failed_stage) {
    std::sort(artifacts.begin(), artifacts.end());
    json j{{"version", kRunManifestVersion},
           {"mode", pipeline_mode_name(mode)},
           {"seed", cfg.seed},
           {"types", types},
           {"artifacts", artifacts},
           {"complete", complete},
           {"failed_stage", failed_stage}};
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << j.dump(1) << "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

inline PipelineReport run_pipeline(const PipelineConfig& cfg, PipelineMode mode) {
    namespace fs = std::filesystem;
    validate_config(cfg);
    if (cfg.out_dir.empty()) throw ConfigError("paths.out is required");
    fs::create_directories(fs::path(cfg.out_dir));
    fs::create_directories(fs::path(cfg.out_dir) / "reports");
    const std::string manifest_path = (fs::path(cfg.out_dir) / "run_manifest.json").string();

    PipelineReport report;
    std::vector<std::string> artifacts;
    std::string stage = "config";
    try {
        Dataset ds;
        const std::string ck_root = cfg.checkpoint_dir.empty() ? cfg.out_dir : cfg.checkpoint_dir;
        if (mode == PipelineMode::Evaluate) {
            stage = "load";
            ds = detail::run_stage(stage, [&] { return load_dataset(fs::path(ck_root) / "dataset"); });
            if (ds.instances.empty())
                throw ValidationError("load: no dataset artifacts under " + ck_root +
                                      "; run ingest or train first");
            std::set<std::string> type_set;
            for (const DatasetInstance& inst : ds.instances)
                if (inst.static_graph.label_name != "unlabeled")
                    type_set.insert(inst.static_graph.label_name);
            report.types.assign(type_set.begin(), type_set.end());
        } else {
            stage = "ingest";
            if (cfg.transactions_path.empty() || cfg.labels_path.empty())
                throw ConfigError("paths.transactions and paths.labels are required");
            IngestResult ing = detail::run_stage(stage, [&] { return ingest_dataset(cfg); });
            ds = std::move(ing.dataset);
            report.types = std::move(ing.types);
            persist_dataset(ds, fs::path(cfg.out_dir) / "dataset");
            artifacts.push_back("dataset/manifest.jsonl");
            artifacts.push_back("dataset/static.jsonl");
            artifacts.push_back("dataset/dynamic.jsonl");
        }

        if (mode != PipelineMode::Ingest) {
            if (mode == PipelineMode::Evaluate) {
                stage = "load";
                json index = read_checkpoint(
                    (fs::path(ck_root) / "checkpoints" / "index.json").string());
                std::vector<std::string> ck_types =
                    index.at("types").get<std::vector<std::string>>();
                if (ck_types != report.types)
                    throw ValidationError("checkpoints cover different account types than the dataset");
                for (const std::string& type : report.types) {
                    detail::run_stage("load(" + type + ")", [&] {
                        fs::path dir = fs::path(ck_root) / "checkpoints" / type;
                        TypeResult tr;
                        tr.type = type;
                        tr.task = build_binary_task(ds, type, cfg.seed);
                        tr.gsg = gsg_model_from_json(read_checkpoint((dir / "gsg.json").string()));
                        tr.ldg = ldg_model_from_json(read_checkpoint((dir / "ldg.json").string()));
                        json cal = read_checkpoint((dir / "calibration.json").string());
                        tr.cal_g = branch_calibration_from_json(cal.at("gsg"));
                        tr.cal_l = branch_calibration_from_json(cal.at("ldg"));
                        tr.clf = classifier_from_json(
                            read_checkpoint((dir / "classifier.json").string()));
                        tr.g_test = detail::gsg_raws(tr.gsg, tr.task.s_test);
                        tr.l_test = detail::ldg_raws(tr.ldg, tr.task.d_test);
                        tr.metrics = detail::eval_variant(tr, *tr.clf, AblationKind::Full);
                        auto branch_eces = [&](const BranchCalibration& bc,
                                               const std::vector<double>& raws, double* before,
                                               double* after, std::array<double, 6>* per_method) {
                            std::vector<double> conf;
                            for (double r : raws) conf.push_back(confidence_from_raw(r, bc.stats));
                            *before = compute_ece(conf, tr.task.y_test, cfg.calib_bins);
                            std::vector<double> ens;
                            for (double r : raws)
                                ens.push_back(
                                    detail::branch_probability(bc, r, AblationKind::Full));
                            *after = compute_ece(ens, tr.task.y_test, cfg.calib_bins);
                            for (int m = 0; m < 6; ++m)
                                (*per_method)[m] = compute_ece(
                                    apply_calibrator(bc.calibrators[m], conf), tr.task.y_test,
                                    cfg.calib_bins);
                        };
                        branch_eces(tr.cal_g, tr.g_test, &tr.gsg_ece_before, &tr.gsg_ece_after,
                                    &tr.gsg_method_ece);
                        branch_eces(tr.cal_l, tr.l_test, &tr.ldg_ece_before, &tr.ldg_ece_after,
                                    &tr.ldg_method_ece);
                        report.results.push_back(std::move(tr));
                        return 0;
                    });
                }
            } else {
                for (const std::string& type : report.types) {
                    stage = "train(" + type + ")";
                    report.results.push_back(
                        detail::run_stage(stage, [&] { return train_type(cfg, ds, type); }));
                }

                stage = "checkpoint";
                detail::run_stage(stage, [&] {
                    fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
                    json index{{"types", report.types},
                               {"classifier_kind", cfg.clf_kind}};
                    write_checkpoint(
                        (fs::path(cfg.out_dir) / "checkpoints" / "index.json").string(), index);
                    artifacts.push_back("checkpoints/index.json");
                    for (TypeResult& tr : report.results) {
                        fs::path dir = fs::path(cfg.out_dir) / "checkpoints" / tr.type;
                        fs::create_directories(dir);
                        write_checkpoint((dir / "gsg.json").string(), gsg_model_to_json(tr.gsg));
                        write_checkpoint((dir / "ldg.json").string(), ldg_model_to_json(tr.ldg));
                        write_checkpoint((dir / "calibration.json").string(),
                                         json{{"gsg", branch_calibration_to_json(tr.cal_g)},
                                              {"ldg", branch_calibration_to_json(tr.cal_l)}});
                        write_checkpoint((dir / "classifier.json").string(),
                                         classifier_to_json(*tr.clf));
                        for (const char* f :
                             {"gsg.json", "ldg.json", "calibration.json", "classifier.json"})
                            artifacts.push_back("checkpoints/" + tr.type + "/" + f);
                    }
                    return 0;
                });

                if (mode == PipelineMode::Ablate) {
                    stage = "ablate";
                    detail::run_stage(stage, [&] {
                        for (TypeResult& tr : report.results) {
                            std::vector<AblationRow> rows = run_ablations(cfg, tr);
                            report.ablation.insert(report.ablation.end(), rows.begin(),
                                                   rows.end());
                        }
                        return 0;
                    });
                }
            }

            stage = "report";
            detail::run_stage(stage, [&] {
                fs::path rep = fs::path(cfg.out_dir) / "reports";
                detail::write_metrics_csv((rep / "metrics.csv").string(), report.results);
                artifacts.push_back("reports/metrics.csv");
                detail::write_calibration_csv((rep / "calibration.csv").string(), report.results);
                artifacts.push_back("reports/calibration.csv");
                if (mode == PipelineMode::Ablate) {
                    detail::write_ablation_csv((rep / "ablation.csv").string(), report.ablation);
                    artifacts.push_back("reports/ablation.csv");
                }
                if (!cfg.sweep_train_fractions.empty() && mode != PipelineMode::Evaluate) {
                    detail::write_sweep_csv((rep / "sweep.csv").string(), cfg, report.results);
                    artifacts.push_back("reports/sweep.csv");
                }
                return 0;
            });
        }

        report.complete = true;
        detail::write_run_manifest(manifest_path, mode, cfg, report.types, artifacts, true, "");
        return report;
    } catch (...) {
        report.failed_stage = stage;
        try {
            detail::write_run_manifest(manifest_path, mode, cfg, report.types, artifacts, false,
                                       stage);
        } catch (...) {
            // Manifest write failure must not mask the original error.
        }
        throw;
    }
}

}  // namespace dbg4eth
