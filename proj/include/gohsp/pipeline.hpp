#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gohsp/admm.hpp"
#include "gohsp/data.hpp"
#include "gohsp/ranking.hpp"
#include "gohsp/sparsity.hpp"
#include "gohsp/vit.hpp"

namespace gohsp {

// One experiment, fully described: serializes to "key = value" lines and
// parses back, so identical config + seed reproduces identical outputs.
struct ExperimentConfig {
    std::string model = "desk";        // desk | tiny | vit-small | deit-tiny
    std::string dataset = "synthetic"; // synthetic | cifar10
    std::string data_dir;              // cifar10 root; GOHSP_DATA_ROOT when empty
    std::uint64_t data_seed = 1;       // synthetic stream seed
    std::size_t samples = 512;         // synthetic sample count

    double ratio = 0.4;       // overall sparsity target, in [0, 1)
    std::size_t rank_batch = 64;
    double rank_eps = 1e-10;

    double rho = 1e-3;
    double lambda = 0.01;
    double eta = 0.05;
    std::size_t epochs = 10;  // soft-pruning epochs E
    std::size_t batch_size = 128;
    // kAuto resolves to epochs (dense) and to 20% of epochs (fine-tune).
    static constexpr std::size_t kAuto = static_cast<std::size_t>(-1);
    std::size_t dense_epochs = kAuto;
    std::size_t finetune_epochs = kAuto;
    bool dry_run = false; // counting-only pipeline: no data, no training

    std::string outdir = "runs/out";
    std::uint64_t seed = 1;

    VitConfig model_config() const;
    std::size_t resolved_dense_epochs() const;
    std::size_t resolved_finetune_epochs() const;
    std::string resolved_data_dir() const; // applies the env-var fallback
    void validate() const;

    std::string serialize() const;
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
};

// Named model shapes usable from configs and the command line.
VitConfig model_preset(const std::string& name);

// Per-block outcome: budgets met, surviving structures, removed fraction of
// the block's own parameters.
struct BlockOutcome {
    std::size_t kappa_h = 0, kappa_c = 0, kappa_m = 0;
    std::vector<std::size_t> heads;
    std::vector<std::size_t> channels; // dense column indices
    std::vector<std::size_t> hidden;
    double realized_sparsity = 0.0;
};

struct RunReport {
    ExperimentConfig config;
    double baseline_acc = 0.0;
    double pruned_acc = 0.0;
    std::size_t params_before = 0, params_after = 0;
    std::size_t flops_before = 0, flops_after = 0;
    std::vector<BlockOutcome> blocks;
    double wall_seconds = 0.0;

    double realized_overall() const; // 1 - params_after / params_before
    // Deterministic content (wall-clock excluded): the reproducibility unit.
    std::string canonical_text() const;
    std::string text() const; // canonical + wall-clock
    std::string csv() const;  // summary row + one row per block
};

// Loads or generates the configured dataset (synthetic blobs or the binary
// training batches under the data root).
Dataset load_dataset(const ExperimentConfig& cfg);

// Importance scores per block from a capture over the first `rank_batch`
// samples (fed in fixed-size chunks; sample order makes batches of different
// sizes nested prefixes of one stream).
std::vector<ImportanceScores> rank_heads(const ModelWeights& model, const Dataset& data,
                                         const RankingConfig& rc);

// Dense baseline for an experiment: loads <outdir>/dense.ckpt when present
// (shape-validated), otherwise trains from scratch and saves it. val_acc
// receives the validation accuracy of the returned model.
ModelWeights dense_baseline(const ExperimentConfig& cfg, const Dataset& train,
                            const Dataset& val, double* val_acc);

// The full flow: dense baseline -> ranking -> budgets/masks -> soft pruning
// -> hard prune + compaction -> fine-tune -> report. Stage checkpoints and
// CSV/text artifacts land in outdir; errors carry a "[stage]" tag.
RunReport run_pipeline(const ExperimentConfig& cfg);

struct AblationRow {
    std::string method; // "soft" | "hard"
    double sparsity = 0.0;
    double accuracy = 0.0;
    std::size_t params_after = 0;
};

// Soft pruning vs hard-prune-then-retrain under identical hyperparameters,
// seed, and total epoch budget, one pair of rows per sparsity level.
std::vector<AblationRow> ablate_soft_vs_hard(const ExperimentConfig& cfg,
                                             const std::vector<double>& grid);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct StabilityRow {
    std::size_t block = 0;
    std::size_t b_small = 0, b_large = 0;
    double tau = 0.0;
};

// Rank-correlation of head importance between every pair of capture batch
// sizes, per block, on the trained dense baseline.
std::vector<StabilityRow> ablate_batch_size(const ExperimentConfig& cfg,
                                            const std::vector<std::size_t>& batches);
std::string stability_csv(const std::vector<StabilityRow>& rows);

// One soft-pruning trace per penalty value, shared dense baseline and seed.
std::map<double, PruneTrace> ablate_rho(const ExperimentConfig& cfg,
                                        const std::vector<double>& rhos);

// Collates the artifacts in an output directory into summary.txt; returns the
// summary. Existing CSVs are the plot-ready data files.
std::string collate_report(const std::string& outdir);

} // namespace gohsp
