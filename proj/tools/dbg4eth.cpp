// Command-line front end: ingest | train | evaluate | ablate | synth.
// Exit codes: 0 success, 2 input/validation failure, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dbg4eth/pipeline.hpp"
#include "dbg4eth/synthetic.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

void print_report(const dbg4eth::PipelineReport& report) {
    for (const dbg4eth::TypeResult& tr : report.results)
        std::printf("%-12s precision=%.4f recall=%.4f f1=%.4f accuracy=%.4f\n", tr.type.c_str(),
                    tr.metrics.precision, tr.metrics.recall, tr.metrics.f1, tr.metrics.accuracy);
    for (const dbg4eth::AblationRow& row : report.ablation)
        std::printf("[ablation] %-32s %-12s f1=%.4f\n", row.variant.c_str(), row.type.c_str(),
                    row.metrics.f1);
}

int run_mode(const std::string& config_path, dbg4eth::PipelineMode mode,
             const std::string& checkpoint_override) {
    dbg4eth::PipelineConfig cfg = dbg4eth::load_config(config_path);
    if (!checkpoint_override.empty()) cfg.checkpoint_dir = checkpoint_override;
    dbg4eth::PipelineReport report = dbg4eth::run_pipeline(cfg, mode);
    print_report(report);
    std::printf("artifacts written under %s\n", cfg.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-perspective Ethereum account classification pipeline"};
    app.require_subcommand(1);

    std::string tx_path, labels_path, out_dir, config_path, checkpoint_dir;
    std::string archetypes_csv = "exchange,phishing,mining";
    int synth_n = 200;
    uint64_t synth_seed = 17;

    CLI::App* ingest = app.add_subcommand("ingest", "sample subgraphs and persist the dataset");
    ingest->add_option("--tx", tx_path, "transactions csv")->required();
    ingest->add_option("--labels", labels_path, "labels csv")->required();
    ingest->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train = app.add_subcommand("train", "train branches, calibrate, fit classifier");
    train->add_option("--config", config_path, "key=value config file")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a persisted checkpoint");
    evaluate->add_option("--config", config_path, "key=value config file")->required();
    evaluate->add_option("--checkpoint", checkpoint_dir,
                         "artifact directory of a previous train run (default: paths.out)");

    CLI::App* ablate = app.add_subcommand("ablate", "train plus ablation variants");
    ablate->add_option("--config", config_path, "key=value config file")->required();

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ledger corpus");
    synth->add_option("--archetypes", archetypes_csv, "comma list: exchange,phishing,mining");
    synth->add_option("--n", synth_n, "accounts per archetype");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (ingest->parsed()) {
            dbg4eth::PipelineConfig cfg;
            cfg.transactions_path = tx_path;
            cfg.labels_path = labels_path;
            cfg.out_dir = out_dir;
            dbg4eth::run_pipeline(cfg, dbg4eth::PipelineMode::Ingest);
            std::printf("dataset written under %s\n", cfg.out_dir.c_str());
            return 0;
        }
        if (train->parsed()) return run_mode(config_path, dbg4eth::PipelineMode::Train, "");
        if (evaluate->parsed())
            return run_mode(config_path, dbg4eth::PipelineMode::Evaluate, checkpoint_dir);
        if (ablate->parsed()) return run_mode(config_path, dbg4eth::PipelineMode::Ablate, "");
        if (synth->parsed()) {
            dbg4eth::SyntheticOptions opt;
            opt.archetypes = dbg4eth::split(archetypes_csv, ',');
            for (std::string& a : opt.archetypes) a = std::string{dbg4eth::trim(a)};
            opt.accounts_per_archetype = synth_n;
            opt.seed = synth_seed;
            dbg4eth::SyntheticCorpus corpus = dbg4eth::generate_synthetic_corpus(opt);
            std::filesystem::create_directories(out_dir);
            dbg4eth::write_synthetic_corpus(
                corpus, (std::filesystem::path(out_dir) / "transactions.csv").string(),
                (std::filesystem::path(out_dir) / "labels.csv").string());
            std::printf("synthetic corpus: %zu transactions, %zu labels under %s\n",
                        corpus.rows.size(), corpus.labels.size(), out_dir.c_str());
            return 0;
        }
    } catch (const dbg4eth::StageError& e) {
        std::cerr << "stage error: " << e.what() << "\n";
        return kExitStage;
    } catch (const dbg4eth::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const dbg4eth::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const dbg4eth::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
