#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gohsp/admm.hpp"
#include "gohsp/errors.hpp"
#include "gohsp/pipeline.hpp"
#include "gohsp/sparsity.hpp"
#include "gohsp/vit.hpp"

using gohsp::ExperimentConfig;
using gohsp::RunReport;
using gohsp::SparsityBudget;
using gohsp::StructureMask;
using gohsp::VitConfig;

namespace {

// Scratch directory wiped on construction and destruction so reruns never see
// stale checkpoints.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string file(const char* name) const { return (path / name).string(); }
};

ExperimentConfig tiny_experiment(const std::string& outdir) {
    ExperimentConfig cfg;
    cfg.model = "tiny";
    cfg.dataset = "synthetic";
    cfg.data_seed = 7;
    cfg.samples = 120;
    cfg.ratio = 0.5;
    cfg.rank_batch = 16;
    cfg.rank_eps = 1e-10;
    cfg.rho = 1e-3;
    cfg.lambda = 0.1;
    cfg.eta = 0.3;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.dense_epochs = 3;
    cfg.finetune_epochs = 1;
    cfg.outdir = outdir;
    cfg.seed = 11;
    return cfg;
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(static_cast<bool>(in));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

std::size_t block_params(std::size_t d, std::size_t kc, std::size_t km) {
    return 2 * d + d * 3 * kc + 3 * kc + kc * d + d + 2 * d + d * km + km + km * d + d;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("experiment config serializes and parses back unchanged") {
    ExperimentConfig cfg;
    cfg.model = "tiny";
    cfg.dataset = "cifar10";
    cfg.data_dir = "/data/root";
    cfg.data_seed = 42;
    cfg.samples = 999;
    cfg.ratio = 0.62;
    cfg.rank_batch = 48;
    cfg.rank_eps = 3e-9;
    cfg.rho = 0.02;
    cfg.lambda = 0.5;
    cfg.eta = 0.125;
    cfg.epochs = 17;
    cfg.batch_size = 33;
    cfg.dense_epochs = ExperimentConfig::kAuto;
    cfg.finetune_epochs = 5;
    cfg.dry_run = true;
    cfg.outdir = "runs/exp1";
    cfg.seed = 1234567;

    const std::string text = cfg.serialize();
    const ExperimentConfig back = ExperimentConfig::parse(text);
    CHECK(back.serialize() == text);
    CHECK(back.model == "tiny");
    CHECK(back.data_dir == "/data/root");
    CHECK(back.dense_epochs == ExperimentConfig::kAuto);
    CHECK(back.finetune_epochs == 5);
    CHECK(back.dry_run == true);
    CHECK(back.ratio == 0.62);

    SUBCASE("comments, blank lines, and spacing are tolerated") {
        const ExperimentConfig c = ExperimentConfig::parse(
            "# experiment\n\n  ratio=0.25  \n\tseed =  9\n# done\n");
        CHECK(c.ratio == 0.25);
        CHECK(c.seed == 9);
        CHECK(c.model == "desk"); // untouched default
    }
}

TEST_CASE("config parsing rejects malformed input") {
    CHECK_THROWS_AS(ExperimentConfig::parse("flux = 1\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("ratio = abc\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("epochs = -3\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("just a line\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("dry_run = yes\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("dense_epochs = later\n"), gohsp::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.txt"), gohsp::ConfigError);
}

TEST_CASE("config validation pins parameter ranges") {
    const auto invalid = [](auto&& mutate) {
        ExperimentConfig cfg = tiny_experiment("runs/x");
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), gohsp::ConfigError);
    };
    invalid([](ExperimentConfig& c) { c.model = "vit-base"; });
    invalid([](ExperimentConfig& c) { c.dataset = "mnist"; });
    invalid([](ExperimentConfig& c) { c.ratio = 1.0; });
    invalid([](ExperimentConfig& c) { c.ratio = -0.1; });
    invalid([](ExperimentConfig& c) { c.rank_batch = 0; });
    invalid([](ExperimentConfig& c) { c.rank_eps = 0.0; });
    invalid([](ExperimentConfig& c) { c.eta = 0.0; });
    invalid([](ExperimentConfig& c) { c.rho = 0.0; });
    invalid([](ExperimentConfig& c) { c.batch_size = 0; });
    invalid([](ExperimentConfig& c) { c.samples = 0; });
    invalid([](ExperimentConfig& c) { c.outdir.clear(); });

    ExperimentConfig ok = tiny_experiment("runs/x");
    ok.ratio = 0.0; // a zero target means "keep everything", which is legal
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("epoch defaults resolve from the soft-pruning epoch count") {
    ExperimentConfig cfg;
    cfg.epochs = 10;
    CHECK(cfg.resolved_dense_epochs() == 10);
    CHECK(cfg.resolved_finetune_epochs() == 2); // 20% of E
    cfg.epochs = 3;
    CHECK(cfg.resolved_finetune_epochs() == 1);
    cfg.epochs = 1;
    CHECK(cfg.resolved_finetune_epochs() == 0);
    cfg.dense_epochs = 7;
    cfg.finetune_epochs = 9;
    CHECK(cfg.resolved_dense_epochs() == 7);
    CHECK(cfg.resolved_finetune_epochs() == 9);
}

TEST_CASE("model presets expose the published shapes") {
    CHECK_NOTHROW(gohsp::model_preset("desk").validate());
    const VitConfig tiny = gohsp::model_preset("tiny");
    CHECK_NOTHROW(tiny.validate());
    CHECK(tiny.d == 8);
    CHECK(tiny.L == 2);
    CHECK(tiny.C == 3);
    CHECK(gohsp::model_preset("vit-small").L == 8);
    CHECK(gohsp::model_preset("deit-tiny").L == 12);
    CHECK_THROWS_AS(gohsp::model_preset("vit-base"), gohsp::ConfigError);
}

TEST_CASE("dataset loading follows the model geometry") {
    TempDir dir("gohsp_pipe_data");
    ExperimentConfig cfg = tiny_experiment(dir.str());
    const gohsp::Dataset d = gohsp::load_dataset(cfg);
    CHECK(d.size() == 120);
    CHECK(d.images.cols() == 3 * 8 * 8);
    for (int label : d.labels) CHECK(label < 3);

    SUBCASE("cifar10 without a data root is a config error") {
        const char* old = std::getenv("GOHSP_DATA_ROOT");
        const std::string saved = old ? old : "";
        unsetenv("GOHSP_DATA_ROOT");
        ExperimentConfig c = cfg;
        c.dataset = "cifar10";
        CHECK(c.resolved_data_dir().empty());
        CHECK_THROWS_AS(gohsp::load_dataset(c), gohsp::ConfigError);
        if (old) setenv("GOHSP_DATA_ROOT", saved.c_str(), 1);
    }
    SUBCASE("the environment variable supplies the data root") {
        const char* old = std::getenv("GOHSP_DATA_ROOT");
        const std::string saved = old ? old : "";
        setenv("GOHSP_DATA_ROOT", dir.str().c_str(), 1);
        ExperimentConfig c = cfg;
        c.dataset = "cifar10";
        CHECK(c.resolved_data_dir() == dir.str());
        // tiny is not a 32x32 RGB 10-class shape
        CHECK_THROWS_AS(gohsp::load_dataset(c), gohsp::ConfigError);
        c.model = "desk";
        // right shape, but the directory holds no batch files
        CHECK_THROWS_AS(gohsp::load_dataset(c), gohsp::DataError);
        if (old)
            setenv("GOHSP_DATA_ROOT", saved.c_str(), 1);
        else
            unsetenv("GOHSP_DATA_ROOT");
    }
}

TEST_CASE("dry-run pipeline reproduces the published parameter arithmetic") {
    TempDir dir("gohsp_pipe_dry");
    ExperimentConfig cfg;
    cfg.model = "vit-small";
    cfg.ratio = 0.4;
    cfg.dry_run = true;
    cfg.outdir = dir.str();

    const RunReport rep = gohsp::run_pipeline(cfg);
    CHECK(rep.params_before == 48011530);
    const VitConfig small = gohsp::vit_small_config();
    const SparsityBudget budget = gohsp::er_allocate(small, 0.4);
    const StructureMask mask = gohsp::mask_from_budget(small, budget);
    CHECK(rep.params_after == gohsp::count_params(small, mask));
    CHECK(std::abs(static_cast<double>(rep.params_after) - 28.8e6) / 28.8e6 < 0.015);
    CHECK(rep.flops_after < rep.flops_before);
    CHECK(rep.baseline_acc == 0.0);
    CHECK(rep.pruned_acc == 0.0);
    REQUIRE(rep.blocks.size() == 8);
    for (const gohsp::BlockOutcome& b : rep.blocks) {
        CHECK(b.kappa_h == budget.kappa_attn_h[0]);
        CHECK(b.kappa_c == budget.kappa_attn_c[0]);
        CHECK(b.kappa_m == budget.kappa_mlp_c[0]);
        CHECK(b.heads.size() == b.kappa_h);
        CHECK(b.channels.size() == b.kappa_c);
        CHECK(b.hidden.size() == b.kappa_m);
    }
    // The report's own sparsity figure must invert back to its param count.
    CHECK(std::abs((1.0 - rep.realized_overall()) * static_cast<double>(rep.params_before) -
                   static_cast<double>(rep.params_after)) < 0.5);

    CHECK(file_exists(dir.file("report.txt")));
    CHECK(file_exists(dir.file("report.csv")));
    CHECK(file_exists(dir.file("config.txt")));
    CHECK_FALSE(file_exists(dir.file("dense.ckpt"))); // counting only, no training

    const RunReport again = gohsp::run_pipeline(cfg);
    CHECK(again.canonical_text() == rep.canonical_text());
    CHECK(rep.text() != rep.canonical_text()); // wall-clock rides only on text()
}

TEST_CASE("tiny pipeline realizes budgets end to end and writes every artifact") {
    TempDir dir("gohsp_pipe_full");
    const ExperimentConfig cfg = tiny_experiment(dir.str());
    const RunReport rep = gohsp::run_pipeline(cfg);

    const VitConfig mc = gohsp::model_preset("tiny");
    const SparsityBudget budget = gohsp::er_allocate(mc, 0.5);
    REQUIRE(rep.blocks.size() == mc.L);
    for (std::size_t l = 0; l < mc.L; ++l) {
        const gohsp::BlockOutcome& b = rep.blocks[l];
        CHECK(b.kappa_h == budget.kappa_attn_h[l]);
        CHECK(b.kappa_c == budget.kappa_attn_c[l]);
        CHECK(b.kappa_m == budget.kappa_mlp_c[l]);
        CHECK(b.heads.size() == b.kappa_h);
        CHECK(b.channels.size() == b.kappa_c);
        CHECK(b.hidden.size() == b.kappa_m);
        const double expect = 1.0 - static_cast<double>(block_params(mc.d, b.kappa_c, b.kappa_m)) /
                                        static_cast<double>(block_params(mc.d, mc.d, mc.m));
        CHECK(b.realized_sparsity == doctest::Approx(expect).epsilon(1e-15));
    }
    CHECK(rep.params_after < rep.params_before);
    CHECK(rep.flops_after < rep.flops_before);
    CHECK(rep.baseline_acc >= 0.0);
    CHECK(rep.baseline_acc <= 1.0);
    CHECK(rep.pruned_acc >= 0.0);
    CHECK(rep.pruned_acc <= 1.0);
    CHECK(rep.wall_seconds > 0.0);

    // Constraint recount straight from the compacted checkpoint.
    const gohsp::ModelWeights compact = gohsp::load_checkpoint(dir.file("compact.ckpt"));
    for (std::size_t l = 0; l < mc.L; ++l) {
        const gohsp::BlockWeights& b = compact.blocks[l];
        CHECK(b.head_channels.size() == budget.kappa_attn_h[l]);
        CHECK(b.total_channels() == budget.kappa_attn_c[l]);
        CHECK(b.hidden() == budget.kappa_mlp_c[l]);
        CHECK(gohsp::group_l0_heads(b.w_qkv, b.w_proj, b.head_channels) ==
              budget.kappa_attn_h[l]);
        CHECK(gohsp::group_l0_columns(b.w_fc1) == budget.kappa_mlp_c[l]);
        CHECK(gohsp::group_l0_rows(b.w_proj) == budget.kappa_attn_c[l]);
    }
    const gohsp::ModelWeights final_model = gohsp::load_checkpoint(dir.file("final.ckpt"));
    CHECK(gohsp::count_params(final_model) == rep.params_after);

    CHECK(file_exists(dir.file("dense.ckpt")));
    CHECK(file_exists(dir.file("soft.ckpt")));
    const std::string trace = slurp(dir.file("prune_trace.csv"));
    CHECK(line_count(trace) == cfg.epochs + 1); // header + one row per epoch
    CHECK(trace.rfind("epoch, loss, masked_norm, primal_residual_attn, primal_residual_mlp, "
                      "val_acc",
                      0) == 0);
    CHECK(line_count(slurp(dir.file("ranking.txt"))) == mc.L);
    CHECK(line_count(slurp(dir.file("report.csv"))) == mc.L + 1);
    CHECK(slurp(dir.file("report.txt")) == rep.text());
    // The recorded config reproduces the run's configuration exactly.
    CHECK(ExperimentConfig::load(dir.file("config.txt")).serialize() == cfg.serialize());
}

TEST_CASE("pipeline reruns are bit-identical in their canonical report") {
    TempDir dir("gohsp_pipe_repro");
    const ExperimentConfig cfg = tiny_experiment(dir.str());
    const RunReport first = gohsp::run_pipeline(cfg);
    // Second run picks up the saved dense baseline instead of retraining.
    const RunReport second = gohsp::run_pipeline(cfg);
    CHECK(second.canonical_text() == first.canonical_text());
    // Third run starts from nothing and retrains the baseline.
    std::filesystem::remove_all(dir.path);
    const RunReport third = gohsp::run_pipeline(cfg);
    CHECK(third.canonical_text() == first.canonical_text());
}

TEST_CASE("near-zero sparsity keeps the whole network") {
    TempDir dir("gohsp_pipe_zero");
    ExperimentConfig cfg = tiny_experiment(dir.str());
    cfg.ratio = 0.0;
    cfg.epochs = 1;
    cfg.dense_epochs = 2;
    cfg.finetune_epochs = 0;
    const RunReport rep = gohsp::run_pipeline(cfg);
    CHECK(rep.params_after == rep.params_before);
    CHECK(rep.flops_after == rep.flops_before);
    CHECK(rep.realized_overall() == 0.0);
    const VitConfig mc = gohsp::model_preset("tiny");
    for (const gohsp::BlockOutcome& b : rep.blocks) {
        CHECK(b.kappa_h == mc.H);
        CHECK(b.kappa_c == mc.d);
        CHECK(b.kappa_m == mc.m);
    }
}

TEST_CASE("stage tags name the failing phase") {
    TempDir dir("gohsp_pipe_stage");
    SUBCASE("config stage") {
        ExperimentConfig cfg = tiny_experiment(dir.str());
        cfg.eta = 0.0;
        try {
            gohsp::run_pipeline(cfg);
            FAIL("expected a config error");
        } catch (const gohsp::ConfigError& e) {
            CHECK(std::string(e.what()).rfind("[config]", 0) == 0);
        }
    }
    SUBCASE("data stage") {
        ExperimentConfig cfg = tiny_experiment(dir.str());
        cfg.model = "desk";
        cfg.dataset = "cifar10";
        cfg.data_dir = dir.str(); // exists, but holds no batch files
        try {
            gohsp::run_pipeline(cfg);
            FAIL("expected a data error");
        } catch (const gohsp::DataError& e) {
            CHECK(std::string(e.what()).rfind("[data]", 0) == 0);
        }
    }
}

TEST_CASE("soft-vs-hard ablation emits one row per method and level") {
    TempDir dir("gohsp_pipe_ablate");
    ExperimentConfig cfg = tiny_experiment(dir.str());
    cfg.epochs = 1;
    cfg.dense_epochs = 2;
    cfg.finetune_epochs = 1;
    const std::vector<double> grid{0.0, 0.5};
    const auto rows = gohsp::ablate_soft_vs_hard(cfg, grid);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].method == "soft");
    CHECK(rows[1].method == "hard");
    CHECK(rows[0].sparsity == 0.0);
    // With nothing to prune the two methods are the same procedure.
    CHECK(rows[0].accuracy == rows[1].accuracy);
    CHECK(rows[0].params_after == rows[1].params_after);
    CHECK(rows[2].method == "soft");
    CHECK(rows[3].method == "hard");
    CHECK(rows[2].sparsity == 0.5);
    // Both legs realize the same structural budget.
    CHECK(rows[2].params_after == rows[3].params_after);
    CHECK(rows[2].params_after < rows[0].params_after);
    for (const auto& r : rows) {
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
    }
    const std::string csv = slurp(dir.file("ablate_soft_hard.csv"));
    CHECK(csv == gohsp::ablation_csv(rows));
    CHECK(line_count(csv) == 5);
    CHECK(csv.rfind("method, sparsity, accuracy, params_after", 0) == 0);

    CHECK_THROWS_AS(gohsp::ablate_soft_vs_hard(cfg, {}), gohsp::ConfigError);
    CHECK_THROWS_AS(gohsp::ablate_soft_vs_hard(cfg, {1.2}), gohsp::ConfigError);
}

TEST_CASE("batch-size ablation reports pairwise rank stability per block") {
    TempDir dir("gohsp_pipe_batch");
    ExperimentConfig cfg = tiny_experiment(dir.str());
    cfg.epochs = 1;
    cfg.dense_epochs = 2;
    const auto rows = gohsp::ablate_batch_size(cfg, {8, 16, 8}); // dupes collapse
    REQUIRE(rows.size() == 2);                                   // one pair x two blocks
    for (const auto& r : rows) {
        CHECK(r.b_small == 8);
        CHECK(r.b_large == 16);
        CHECK(r.tau >= -1.0);
        CHECK(r.tau <= 1.0);
    }
    CHECK(rows[0].block == 0);
    CHECK(rows[1].block == 1);
    const auto again = gohsp::ablate_batch_size(cfg, {8, 16});
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].tau == rows[i].tau);
    CHECK(file_exists(dir.file("ablate_batch.csv")));

    CHECK_THROWS_AS(gohsp::ablate_batch_size(cfg, {16, 16}), gohsp::ConfigError);
    CHECK_THROWS_AS(gohsp::ablate_batch_size(cfg, {0, 16}), gohsp::ConfigError);
}

TEST_CASE("identical captures give perfect rank stability") {
    TempDir dir("gohsp_pipe_rankdet");
    const ExperimentConfig cfg = tiny_experiment(dir.str());
    gohsp::Dataset full = gohsp::load_dataset(cfg);
    auto parts = gohsp::split_train_val(full);
    const gohsp::ModelWeights model =
        gohsp::init_model(gohsp::model_preset("tiny"), cfg.seed);
    gohsp::RankingConfig rc;
    rc.batch = 1000000; // clamps to the training-set size
    rc.eps = 1e-10;
    const auto a = gohsp::rank_heads(model, parts.first, rc);
    const auto b = gohsp::rank_heads(model, parts.first, rc);
    REQUIRE(a.size() == b.size());
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t h = 0; h < a[l].s.size(); ++h) CHECK(a[l].s[h] == b[l].s[h]);
        CHECK(gohsp::rank_stability(a[l], b[l]) == 1.0);
    }
    gohsp::Dataset empty;
    CHECK_THROWS_AS(gohsp::rank_heads(model, empty, rc), gohsp::ContractError);
}

TEST_CASE("penalty ablation writes one trace per value") {
    TempDir dir("gohsp_pipe_rho");
    ExperimentConfig cfg = tiny_experiment(dir.str());
    cfg.epochs = 2;
    cfg.dense_epochs = 2;
    const auto traces = gohsp::ablate_rho(cfg, {1e-3, 1e-2});
    REQUIRE(traces.size() == 2);
    for (const auto& [rho, trace] : traces) CHECK(trace.rows.size() == cfg.epochs);
    CHECK(file_exists(dir.file("rho_0.001_trace.csv")));
    CHECK(file_exists(dir.file("rho_0.01_trace.csv")));
    const std::string csv = slurp(dir.file("rho_0.001_trace.csv"));
    CHECK(csv.rfind("epoch, loss, masked_norm, primal_residual_attn, primal_residual_mlp, "
                    "val_acc",
                    0) == 0);

    CHECK_THROWS_AS(gohsp::ablate_rho(cfg, {}), gohsp::ConfigError);
    CHECK_THROWS_AS(gohsp::ablate_rho(cfg, {-1.0}), gohsp::ConfigError);
}

TEST_CASE("dense baseline trains once and reloads bit-exactly") {
    TempDir dir("gohsp_pipe_base");
    const ExperimentConfig cfg = tiny_experiment(dir.str());
    gohsp::Dataset full = gohsp::load_dataset(cfg);
    auto parts = gohsp::split_train_val(full);
    double acc1 = -1.0, acc2 = -2.0;
    const gohsp::ModelWeights m1 = gohsp::dense_baseline(cfg, parts.first, parts.second, &acc1);
    CHECK(file_exists(dir.file("dense.ckpt")));
    const gohsp::ModelWeights m2 = gohsp::dense_baseline(cfg, parts.first, parts.second, &acc2);
    CHECK(acc1 == acc2);
    const auto p1 = gohsp::param_tensors(m1);
    const auto p2 = gohsp::param_tensors(m2);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        REQUIRE(p1[i]->numel() == p2[i]->numel());
        for (std::size_t k = 0; k < p1[i]->numel(); ++k)
            CHECK(p1[i]->vec()[k] == p2[i]->vec()[k]);
    }
}

TEST_CASE("collate_report summarizes the artifacts of a run") {
    TempDir dir("gohsp_pipe_collate");
    const ExperimentConfig cfg = tiny_experiment(dir.str());
    gohsp::run_pipeline(cfg);
    const std::string summary = gohsp::collate_report(dir.str());
    CHECK(summary.find("report.txt") != std::string::npos);
    CHECK(summary.find("prune_trace.csv") != std::string::npos);
    CHECK(summary.find("dense.ckpt: checkpoint") != std::string::npos);
    CHECK(summary.find("== run report ==") != std::string::npos);
    CHECK(file_exists(dir.file("summary.txt")));
    CHECK(slurp(dir.file("summary.txt")) == summary);
    CHECK_THROWS_AS(gohsp::collate_report(dir.file("missing_subdir")), gohsp::DataError);
}

} // TEST_SUITE
