#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gohsp/errors.hpp"
#include "gohsp/pipeline.hpp"

namespace {

using gohsp::Dataset;
using gohsp::ExperimentConfig;
using gohsp::ModelWeights;
using gohsp::VitConfig;

// Raw flag storage. Only flags the user actually passed are copied onto the
// config, so precedence is: built-in defaults < config file < command line.
struct RawOpts {
    std::string config_path;
    std::string model, dataset, data_dir, outdir;
    std::uint64_t data_seed = 0, seed = 0;
    std::size_t samples = 0, rank_batch = 0, epochs = 0, batch_size = 0;
    double ratio = 0, rank_eps = 0, rho = 0, lambda = 0, eta = 0;
    std::string dense_epochs, finetune_epochs;
    bool dry_run = false;
    std::vector<double> grid{0.4, 0.6, 0.8};
    std::vector<std::size_t> batches{16, 64, 256};
    std::vector<double> rhos{1e-4, 1e-3, 1e-2};
};

void add_common(CLI::App* sub, RawOpts& raw) {
    sub->add_option("--config", raw.config_path, "config file of 'key = value' lines");
    sub->add_option("--model", raw.model, "model preset: desk, tiny, vit-small, deit-tiny");
    sub->add_option("--dataset", raw.dataset, "dataset: synthetic or cifar10");
    sub->add_option("--data-dir", raw.data_dir,
                    "cifar10 directory (falls back to $GOHSP_DATA_ROOT)");
    sub->add_option("--data-seed", raw.data_seed, "synthetic data stream seed");
    sub->add_option("--samples", raw.samples, "synthetic sample count");
    sub->add_option("--ratio", raw.ratio, "overall sparsity target in [0, 1)");
    sub->add_option("--rank-batch", raw.rank_batch, "samples captured for head ranking");
    sub->add_option("--rank-eps", raw.rank_eps, "power-iteration convergence tolerance");
    sub->add_option("--rho", raw.rho, "constraint penalty strength");
    sub->add_option("--lambda", raw.lambda, "masked-entry decay coefficient");
    sub->add_option("--eta", raw.eta, "learning rate");
    sub->add_option("--epochs", raw.epochs, "soft-pruning epochs E");
    sub->add_option("--batch-size", raw.batch_size, "training minibatch size");
    sub->add_option("--dense-epochs", raw.dense_epochs, "baseline epochs, or 'auto' (= E)");
    sub->add_option("--finetune-epochs", raw.finetune_epochs,
                    "fine-tune epochs, or 'auto' (= 20% of E)");
    sub->add_flag("--dry-run", raw.dry_run, "counting-only pipeline: no data, no training");
    sub->add_option("--outdir", raw.outdir, "output directory for checkpoints and reports");
    sub->add_option("--seed", raw.seed, "global seed for weight initialization");
}

std::size_t parse_epochs_flag(const std::string& s, const char* flag) {
    if (s == "auto") return ExperimentConfig::kAuto;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size() || s[0] == '-' || s[0] == '+') throw std::invalid_argument("");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw gohsp::ConfigError(std::string(flag) + " needs 'auto' or an unsigned integer, got '" +
                                 s + "'");
    }
}

ExperimentConfig build_config(const CLI::App* sub, const RawOpts& raw) {
    ExperimentConfig cfg;
    if (sub->count("--config")) cfg = ExperimentConfig::load(raw.config_path);
    const auto has = [&](const char* name) { return sub->count(name) > 0; };
    if (has("--model")) cfg.model = raw.model;
    if (has("--dataset")) cfg.dataset = raw.dataset;
    if (has("--data-dir")) cfg.data_dir = raw.data_dir;
    if (has("--data-seed")) cfg.data_seed = raw.data_seed;
    if (has("--samples")) cfg.samples = raw.samples;
    if (has("--ratio")) cfg.ratio = raw.ratio;
    if (has("--rank-batch")) cfg.rank_batch = raw.rank_batch;
    if (has("--rank-eps")) cfg.rank_eps = raw.rank_eps;
    if (has("--rho")) cfg.rho = raw.rho;
    if (has("--lambda")) cfg.lambda = raw.lambda;
    if (has("--eta")) cfg.eta = raw.eta;
    if (has("--epochs")) cfg.epochs = raw.epochs;
    if (has("--batch-size")) cfg.batch_size = raw.batch_size;
    if (has("--dense-epochs")) cfg.dense_epochs = parse_epochs_flag(raw.dense_epochs, "--dense-epochs");
    if (has("--finetune-epochs"))
        cfg.finetune_epochs = parse_epochs_flag(raw.finetune_epochs, "--finetune-epochs");
    if (has("--dry-run")) cfg.dry_run = raw.dry_run;
    if (has("--outdir")) cfg.outdir = raw.outdir;
    if (has("--seed")) cfg.seed = raw.seed;
    return cfg;
}

// Loads the configured dataset and applies the fixed last-tenth holdout.
void load_split(const ExperimentConfig& cfg, Dataset& train, Dataset& val) {
    Dataset full = gohsp::load_dataset(cfg);
    full.validate();
    if (full.size() < 10)
        throw gohsp::DataError("need at least 10 samples to hold out a validation split");
    auto parts = gohsp::split_train_val(full);
    train = std::move(parts.first);
    val = std::move(parts.second);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw gohsp::DataError("cannot write " + path);
    out << content;
}

std::string out_path(const ExperimentConfig& cfg, const char* name) {
    return (std::filesystem::path(cfg.outdir) / name).string();
}

int cmd_train_dense(const ExperimentConfig& cfg) {
    cfg.validate();
    Dataset train, val;
    load_split(cfg, train, val);
    double acc = 0.0;
    gohsp::dense_baseline(cfg, train, val, &acc);
    std::cout << "dense baseline: val accuracy " << acc << ", checkpoint "
              << out_path(cfg, "dense.ckpt") << "\n";
    return 0;
}

int cmd_rank(const ExperimentConfig& cfg) {
    cfg.validate();
    const VitConfig mc = cfg.model_config();
    Dataset train, val;
    load_split(cfg, train, val);
    const ModelWeights model = gohsp::dense_baseline(cfg, train, val, nullptr);
    const gohsp::SparsityBudget budget = gohsp::er_allocate(mc, std::max(cfg.ratio, 1e-9));
    gohsp::RankingConfig rc;
    rc.batch = cfg.rank_batch;
    rc.eps = cfg.rank_eps;
    const auto scores = gohsp::rank_heads(model, train, rc);
    std::string records;
    for (std::size_t l = 0; l < scores.size(); ++l) {
        const gohsp::HeadMask mask = gohsp::build_head_mask(scores[l], budget.kappa_attn_h[l], mc);
        records += gohsp::ranking_record(scores[l], mask);
        records += '\n';
    }
    write_text(out_path(cfg, "ranking.txt"), records);
    std::cout << records;
    return 0;
}

int cmd_prune(ExperimentConfig cfg) {
    cfg.finetune_epochs = 0; // prune stops at the compacted checkpoint
    const gohsp::RunReport rep = gohsp::run_pipeline(cfg);
    std::cout << rep.text();
    return 0;
}

int cmd_finetune(const ExperimentConfig& cfg) {
    cfg.validate();
    Dataset train, val;
    load_split(cfg, train, val);
    ModelWeights model = gohsp::load_checkpoint(out_path(cfg, "compact.ckpt"));
    gohsp::finetune(model, train, val, cfg.resolved_finetune_epochs(), cfg.eta, cfg.batch_size);
    gohsp::save_checkpoint(model, out_path(cfg, "final.ckpt"));
    std::cout << "fine-tuned: val accuracy "
              << gohsp::accuracy(model, val.images, val.labels) << ", checkpoint "
              << out_path(cfg, "final.ckpt") << "\n";
    return 0;
}

int cmd_pipeline(const ExperimentConfig& cfg) {
    const gohsp::RunReport rep = gohsp::run_pipeline(cfg);
    std::cout << rep.text();
    return 0;
}

int cmd_ablate_soft_hard(const ExperimentConfig& cfg, const std::vector<double>& grid) {
    const auto rows = gohsp::ablate_soft_vs_hard(cfg, grid);
    std::cout << gohsp::ablation_csv(rows);
    return 0;
}

int cmd_ablate_batch(const ExperimentConfig& cfg, const std::vector<std::size_t>& batches) {
    const auto rows = gohsp::ablate_batch_size(cfg, batches);
    std::cout << gohsp::stability_csv(rows);
    return 0;
}

int cmd_ablate_rho(const ExperimentConfig& cfg, const std::vector<double>& rhos) {
    const auto traces = gohsp::ablate_rho(cfg, rhos);
    for (const auto& [rho, trace] : traces)
        std::cout << "rho " << rho << ": " << trace.rows.size() << " epochs traced\n";
    std::cout << "traces written under " << cfg.outdir << "\n";
    return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
    std::cout << gohsp::collate_report(cfg.outdir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured pruning toolkit for small vision transformers"};
    app.require_subcommand(1);
    RawOpts raw;

    CLI::App* train_dense = app.add_subcommand("train-dense", "train or load the dense baseline");
    CLI::App* rank = app.add_subcommand("rank", "rank attention heads on the dense baseline");
    CLI::App* prune = app.add_subcommand("prune", "soft-prune then hard-prune, no fine-tune");
    CLI::App* finetune = app.add_subcommand("finetune", "fine-tune the compacted checkpoint");
    CLI::App* pipeline = app.add_subcommand("pipeline", "full prune-to-report flow");
    CLI::App* ab_sh = app.add_subcommand("ablate-soft-hard", "soft vs hard pruning over a grid");
    CLI::App* ab_b = app.add_subcommand("ablate-batch", "ranking stability across batch sizes");
    CLI::App* ab_r = app.add_subcommand("ablate-rho", "sparsity-speed traces across penalties");
    CLI::App* report = app.add_subcommand("report", "collate an output directory's artifacts");
    for (CLI::App* sub : {train_dense, rank, prune, finetune, pipeline, ab_sh, ab_b, ab_r, report})
        add_common(sub, raw);
    ab_sh->add_option("--grid", raw.grid, "sparsity levels (default 0.4 0.6 0.8)");
    ab_b->add_option("--batches", raw.batches, "capture batch sizes (default 16 64 256)");
    ab_r->add_option("--rhos", raw.rhos, "penalty values (default 1e-4 1e-3 1e-2)");

    try {
        app.parse(argc, argv);
        const CLI::App* sub = app.get_subcommands().front();
        const ExperimentConfig cfg = build_config(sub, raw);
        if (sub == train_dense) return cmd_train_dense(cfg);
        if (sub == rank) return cmd_rank(cfg);
        if (sub == prune) return cmd_prune(cfg);
        if (sub == finetune) return cmd_finetune(cfg);
        if (sub == pipeline) return cmd_pipeline(cfg);
        if (sub == ab_sh) return cmd_ablate_soft_hard(cfg, raw.grid);
        if (sub == ab_b) return cmd_ablate_batch(cfg, raw.batches);
        if (sub == ab_r) return cmd_ablate_rho(cfg, raw.rhos);
        if (sub == report) return cmd_report(cfg);
        std::cerr << "no subcommand dispatched\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gohsp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const gohsp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const gohsp::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const gohsp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
