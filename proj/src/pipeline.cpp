#include "gohsp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "gohsp/errors.hpp"

namespace gohsp {
namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string tagged(const char* tag, const char* what) {
    return std::string("[") + tag + "] " + what;
}

// Runs one pipeline stage; any library error is rethrown with the stage tag
// prefixed so a failed run names the phase that aborted it.
template <typename F>
decltype(auto) stage(const char* tag, F&& f) {
    try {
        return std::forward<F>(f)();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(tagged(tag, e.what()), e.delta);
    } catch (const FormatError& e) {
        throw FormatError(tagged(tag, e.what()));
    } catch (const DataError& e) {
        throw DataError(tagged(tag, e.what()));
    } catch (const ConfigError& e) {
        throw ConfigError(tagged(tag, e.what()));
    } catch (const DivergenceError& e) {
        throw DivergenceError(tagged(tag, e.what()));
    } catch (const BudgetError& e) {
        throw BudgetError(tagged(tag, e.what()));
    } catch (const DimensionError& e) {
        throw DimensionError(tagged(tag, e.what()));
    } catch (const IndexError& e) {
        throw IndexError(tagged(tag, e.what()));
    } catch (const ContractError& e) {
        throw ContractError(tagged(tag, e.what()));
    } catch (const NumericError& e) {
        throw NumericError(tagged(tag, e.what()));
    } catch (const Error& e) {
        throw Error(tagged(tag, e.what()));
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    if (s.empty() || s[0] == '-' || s[0] == '+')
        throw ConfigError("config key '" + key + "' needs an unsigned integer, got '" + s + "'");
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs an unsigned integer, got '" + s + "'");
    }
}

double parse_f64(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' needs a number, got '" + s + "'");
    }
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("config key '" + key + "' needs true or false, got '" + s + "'");
}

std::size_t parse_epochs(const std::string& s, const std::string& key) {
    if (s == "auto") return ExperimentConfig::kAuto;
    return static_cast<std::size_t>(parse_u64(s, key));
}

std::string epochs_str(std::size_t v) {
    return v == ExperimentConfig::kAuto ? std::string("auto") : std::to_string(v);
}

std::string join_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << content;
    out.flush();
    if (!out) throw DataError("short write to " + path);
}

std::string join_indices(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(v[i]);
    }
    return out;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Budgets come from a strictly positive ratio; a requested ratio of ~0 maps
// to the smallest one the allocator accepts, which yields full budgets.
double effective_ratio(double ratio) { return std::max(ratio, 1e-9); }

std::size_t block_param_count(std::size_t d, std::size_t kc, std::size_t km) {
    std::size_t n = 0;
    if (kc > 0) n += 2 * d + d * 3 * kc + 3 * kc + kc * d + d;
    if (km > 0) n += 2 * d + d * km + km + km * d + d;
    return n;
}

BlockOutcome make_outcome(const VitConfig& mc, std::size_t kh, std::size_t kc, std::size_t km,
                          std::vector<std::size_t> heads, std::vector<std::size_t> channels,
                          std::vector<std::size_t> hidden) {
    BlockOutcome b;
    b.kappa_h = kh;
    b.kappa_c = kc;
    b.kappa_m = km;
    b.heads = std::move(heads);
    b.channels = std::move(channels);
    b.hidden = std::move(hidden);
    const double dense = static_cast<double>(block_param_count(mc.d, mc.d, mc.m));
    b.realized_sparsity = 1.0 - static_cast<double>(block_param_count(mc.d, kc, km)) / dense;
    return b;
}

std::vector<BlockOutcome> outcomes_from_mask(const VitConfig& mc, const SparsityBudget& budget,
                                             const StructureMask& mask) {
    std::vector<BlockOutcome> out;
    const std::size_t dh = mc.head_dim();
    for (std::size_t l = 0; l < mc.L; ++l) {
        const StructureMask::Block& mb = mask.blocks[l];
        std::vector<std::size_t> heads, channels, hidden;
        for (std::size_t h = 0; h < mc.H; ++h)
            if (mb.keep_head[h]) heads.push_back(h);
        for (std::size_t c = 0; c < mc.d; ++c)
            if (mb.keep_channel[c] && mb.keep_head[c / dh]) channels.push_back(c);
        for (std::size_t u = 0; u < mc.m; ++u)
            if (mb.keep_hidden[u]) hidden.push_back(u);
        out.push_back(make_outcome(mc, budget.kappa_attn_h[l], budget.kappa_attn_c[l],
                                   budget.kappa_mlp_c[l], std::move(heads), std::move(channels),
                                   std::move(hidden)));
    }
    return out;
}

std::vector<BlockOutcome> outcomes_from_report(const VitConfig& mc, const SparsityBudget& budget,
                                               const CompactionReport& comp) {
    if (comp.blocks.size() != mc.L) throw DimensionError("compaction report block count mismatch");
    std::vector<BlockOutcome> out;
    for (std::size_t l = 0; l < comp.blocks.size(); ++l) {
        const CompactionReport::Block& cb = comp.blocks[l];
        std::vector<std::size_t> channels;
        for (const std::vector<std::size_t>& per_head : cb.head_channels)
            channels.insert(channels.end(), per_head.begin(), per_head.end());
        out.push_back(make_outcome(mc, budget.kappa_attn_h[l], budget.kappa_attn_c[l],
                                   budget.kappa_mlp_c[l], cb.heads, std::move(channels),
                                   cb.hidden));
    }
    return out;
}

StructureMask mask_from_report(const VitConfig& mc, const CompactionReport& comp) {
    if (comp.blocks.size() != mc.L) throw DimensionError("compaction report block count mismatch");
    StructureMask mask = StructureMask::all_keep(mc);
    for (std::size_t l = 0; l < comp.blocks.size(); ++l) {
        StructureMask::Block& mb = mask.blocks[l];
        std::fill(mb.keep_head.begin(), mb.keep_head.end(), std::uint8_t{0});
        std::fill(mb.keep_channel.begin(), mb.keep_channel.end(), std::uint8_t{0});
        std::fill(mb.keep_hidden.begin(), mb.keep_hidden.end(), std::uint8_t{0});
        const CompactionReport::Block& cb = comp.blocks[l];
        for (std::size_t h : cb.heads) {
            if (h >= mc.H) throw IndexError("kept head index out of range");
            mb.keep_head[h] = 1;
        }
        for (const std::vector<std::size_t>& per_head : cb.head_channels)
            for (std::size_t c : per_head) {
                if (c >= mc.d) throw IndexError("kept channel index out of range");
                mb.keep_channel[c] = 1;
            }
        for (std::size_t u : cb.hidden) {
            if (u >= mc.m) throw IndexError("kept hidden index out of range");
            mb.keep_hidden[u] = 1;
        }
    }
    return mask;
}

// Recounts structural budgets on a model as loaded from disk so the report
// never repeats an optimizer-side claim it did not check.
void verify_budget(const ModelWeights& model, const SparsityBudget& budget) {
    const std::size_t L = model.blocks.size();
    if (budget.kappa_attn_h.size() != L || budget.kappa_attn_c.size() != L ||
        budget.kappa_mlp_c.size() != L)
        throw ContractError("budget block count disagrees with the checkpoint");
    for (std::size_t l = 0; l < L; ++l) {
        const BlockWeights& b = model.blocks[l];
        const std::size_t kh = budget.kappa_attn_h[l];
        const std::size_t kc = budget.kappa_attn_c[l];
        const std::size_t km = budget.kappa_mlp_c[l];
        const std::string where = "block " + std::to_string(l) + ": ";
        if (b.head_channels.size() != kh)
            throw ContractError(where + "checkpoint keeps " +
                                std::to_string(b.head_channels.size()) + " heads, budget says " +
                                std::to_string(kh));
        if (b.total_channels() != kc)
            throw ContractError(where + "checkpoint keeps " + std::to_string(b.total_channels()) +
                                " attention channels, budget says " + std::to_string(kc));
        if (b.hidden() != km)
            throw ContractError(where + "checkpoint keeps " + std::to_string(b.hidden()) +
                                " hidden units, budget says " + std::to_string(km));
        if (group_l0_heads(b.w_qkv, b.w_proj, b.head_channels) != kh)
            throw ContractError(where + "live head groups != head budget");
        if (group_l0_columns(b.w_qkv) != 3 * kc)
            throw ContractError(where + "live qkv columns != 3x channel budget");
        if (group_l0_rows(b.w_proj) != kc)
            throw ContractError(where + "live projection rows != channel budget");
        if (group_l0_columns(b.w_fc1) != km)
            throw ContractError(where + "live fc1 columns != hidden budget");
        if (group_l0_rows(b.w_fc2) != km)
            throw ContractError(where + "live fc2 rows != hidden budget");
    }
}

Dataset load_split(const ExperimentConfig& cfg, Dataset* val_out) {
    Dataset full = load_dataset(cfg);
    full.validate();
    if (full.size() < 10)
        throw DataError("need at least 10 samples to hold out a validation split, got " +
                        std::to_string(full.size()));
    auto parts = split_train_val(full);
    *val_out = std::move(parts.second);
    return std::move(parts.first);
}

std::vector<HeadMask> masks_for(const ModelWeights& model, const Dataset& train,
                                const ExperimentConfig& cfg, const SparsityBudget& budget,
                                std::string* records) {
    RankingConfig rc;
    rc.batch = cfg.rank_batch;
    rc.eps = cfg.rank_eps;
    const std::vector<ImportanceScores> scores = rank_heads(model, train, rc);
    std::vector<HeadMask> masks;
    masks.reserve(scores.size());
    for (std::size_t l = 0; l < scores.size(); ++l) {
        masks.push_back(build_head_mask(scores[l], budget.kappa_attn_h[l], model.cfg));
        if (records) {
            *records += ranking_record(scores[l], masks[l]);
            *records += '\n';
        }
    }
    return masks;
}

} // namespace

VitConfig model_preset(const std::string& name) {
    if (name == "desk") return desk_config();
    if (name == "tiny") {
        VitConfig c;
        c.image_size = 8;
        c.patch_size = 4;
        c.d = 8;
        c.L = 2;
        c.H = 2;
        c.m = 16;
        c.C = 3;
        return c;
    }
    if (name == "vit-small") return vit_small_config();
    if (name == "deit-tiny") return deit_tiny_config();
    throw ConfigError("unknown model preset '" + name +
                      "' (expected desk, tiny, vit-small, or deit-tiny)");
}

VitConfig ExperimentConfig::model_config() const { return model_preset(model); }

std::size_t ExperimentConfig::resolved_dense_epochs() const {
    return dense_epochs == kAuto ? epochs : dense_epochs;
}

std::size_t ExperimentConfig::resolved_finetune_epochs() const {
    if (finetune_epochs != kAuto) return finetune_epochs;
    return static_cast<std::size_t>(0.2 * static_cast<double>(epochs) + 0.5);
}

std::string ExperimentConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    const char* env = std::getenv("GOHSP_DATA_ROOT");
    return (env && *env) ? std::string(env) : std::string();
}

void ExperimentConfig::validate() const {
    model_config().validate();
    if (dataset != "synthetic" && dataset != "cifar10")
        throw ConfigError("dataset must be synthetic or cifar10, got '" + dataset + "'");
    if (dataset == "synthetic" && samples == 0)
        throw ConfigError("samples must be positive for the synthetic dataset");
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw ConfigError("ratio must lie in [0, 1), got " + fmt17(ratio));
    if (rank_batch == 0) throw ConfigError("rank_batch must be positive");
    if (!(rank_eps > 0.0)) throw ConfigError("rank_eps must be positive");
    AdmmHyper hp;
    hp.rho = rho;
    hp.lambda = lambda;
    hp.eta = eta;
    hp.epochs = epochs;
    hp.validate();
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (outdir.empty()) throw ConfigError("outdir must be set");
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream o;
    o << "model = " << model << "\n";
    o << "dataset = " << dataset << "\n";
    o << "data_dir = " << data_dir << "\n";
    o << "data_seed = " << data_seed << "\n";
    o << "samples = " << samples << "\n";
    o << "ratio = " << fmt17(ratio) << "\n";
    o << "rank_batch = " << rank_batch << "\n";
    o << "rank_eps = " << fmt17(rank_eps) << "\n";
    o << "rho = " << fmt17(rho) << "\n";
    o << "lambda = " << fmt17(lambda) << "\n";
    o << "eta = " << fmt17(eta) << "\n";
    o << "epochs = " << epochs << "\n";
    o << "batch_size = " << batch_size << "\n";
    o << "dense_epochs = " << epochs_str(dense_epochs) << "\n";
    o << "finetune_epochs = " << epochs_str(finetune_epochs) << "\n";
    o << "dry_run = " << (dry_run ? "true" : "false") << "\n";
    o << "outdir = " << outdir << "\n";
    o << "seed = " << seed << "\n";
    return o.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              " is not 'key = value': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (key == "model") cfg.model = val;
        else if (key == "dataset") cfg.dataset = val;
        else if (key == "data_dir") cfg.data_dir = val;
        else if (key == "data_seed") cfg.data_seed = parse_u64(val, key);
        else if (key == "samples") cfg.samples = static_cast<std::size_t>(parse_u64(val, key));
        else if (key == "ratio") cfg.ratio = parse_f64(val, key);
        else if (key == "rank_batch") cfg.rank_batch = static_cast<std::size_t>(parse_u64(val, key));
        else if (key == "rank_eps") cfg.rank_eps = parse_f64(val, key);
        else if (key == "rho") cfg.rho = parse_f64(val, key);
        else if (key == "lambda") cfg.lambda = parse_f64(val, key);
        else if (key == "eta") cfg.eta = parse_f64(val, key);
        else if (key == "epochs") cfg.epochs = static_cast<std::size_t>(parse_u64(val, key));
        else if (key == "batch_size") cfg.batch_size = static_cast<std::size_t>(parse_u64(val, key));
        else if (key == "dense_epochs") cfg.dense_epochs = parse_epochs(val, key);
        else if (key == "finetune_epochs") cfg.finetune_epochs = parse_epochs(val, key);
        else if (key == "dry_run") cfg.dry_run = parse_bool(val, key);
        else if (key == "outdir") cfg.outdir = val;
        else if (key == "seed") cfg.seed = parse_u64(val, key);
        else throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(lineno));
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

double RunReport::realized_overall() const {
    if (params_before == 0) return 0.0;
    return 1.0 - static_cast<double>(params_after) / static_cast<double>(params_before);
}

std::string RunReport::canonical_text() const {
    std::ostringstream o;
    o << "== run report ==\n";
    o << "-- config --\n" << config.serialize();
    o << "-- results --\n";
    o << "baseline_acc = " << fmt17(baseline_acc) << "\n";
    o << "pruned_acc = " << fmt17(pruned_acc) << "\n";
    o << "params_before = " << params_before << "\n";
    o << "params_after = " << params_after << "\n";
    o << "flops_before = " << flops_before << "\n";
    o << "flops_after = " << flops_after << "\n";
    o << "realized_sparsity = " << fmt17(realized_overall()) << "\n";
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const BlockOutcome& b = blocks[l];
        o << "block " << l << " | kappa_h " << b.kappa_h << " | kappa_c " << b.kappa_c
          << " | kappa_m " << b.kappa_m << " | realized " << fmt17(b.realized_sparsity) << "\n";
        o << "  heads: " << join_indices(b.heads) << "\n";
        o << "  channels: " << join_indices(b.channels) << "\n";
        o << "  hidden: " << join_indices(b.hidden) << "\n";
    }
    return o.str();
}

std::string RunReport::text() const {
    return canonical_text() + "wall_seconds = " + fmt17(wall_seconds) + "\n";
}

std::string RunReport::csv() const {
    std::ostringstream o;
    o << "block, kappa_h, kappa_c, kappa_m, realized_sparsity, heads, channels, hidden\n";
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const BlockOutcome& b = blocks[l];
        o << l << ", " << b.kappa_h << ", " << b.kappa_c << ", " << b.kappa_m << ", "
          << fmt17(b.realized_sparsity) << ", " << join_indices(b.heads) << ", "
          << join_indices(b.channels) << ", " << join_indices(b.hidden) << "\n";
    }
    return o.str();
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    const VitConfig mc = cfg.model_config();
    const std::size_t pixels = mc.channels * mc.image_size * mc.image_size;
    if (cfg.dataset == "synthetic") return gen_synthetic(cfg.data_seed, mc.C, cfg.samples, pixels);
    if (cfg.dataset == "cifar10") {
        const std::string dir = cfg.resolved_data_dir();
        if (dir.empty())
            throw ConfigError("cifar10 dataset needs data_dir or the GOHSP_DATA_ROOT variable");
        if (pixels != 3072 || mc.C != 10)
            throw ConfigError("cifar10 needs a 32x32 RGB 10-class model; preset '" + cfg.model +
                              "' is incompatible");
        return load_cifar10(dir);
    }
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

std::vector<ImportanceScores> rank_heads(const ModelWeights& model, const Dataset& data,
                                         const RankingConfig& rc) {
    if (data.size() == 0) throw ContractError("ranking needs a nonempty capture set");
    const std::size_t take = std::min(rc.batch, data.size());
    // Fixed-size chunks over the leading samples keep memory bounded while
    // keeping captures at different batch sizes prefixes of one stream.
    const std::size_t chunk = 32;
    HeadCapture capture;
    for (std::size_t b = 0; b < take; b += chunk) {
        const Dataset part = slice_batch(data, b, std::min(b + chunk, take));
        forward(model, part.images, nullptr, &capture);
    }
    std::vector<ImportanceScores> out;
    out.reserve(model.blocks.size());
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const TransitionMatrix tm = build_transition_matrix(capture, l);
        out.push_back(power_iteration(tm, rc).scores);
    }
    return out;
}

ModelWeights dense_baseline(const ExperimentConfig& cfg, const Dataset& train, const Dataset& val,
                            double* val_acc) {
    const VitConfig mc = cfg.model_config();
    ensure_dir(cfg.outdir);
    const std::string ckpt = join_path(cfg.outdir, "dense.ckpt");
    ModelWeights model;
    if (std::filesystem::exists(ckpt)) {
        model = load_checkpoint(ckpt, mc);
    } else {
        model = init_model(mc, cfg.seed);
        train_sgd(model, train, val, cfg.resolved_dense_epochs(), cfg.eta, cfg.batch_size, true);
        save_checkpoint(model, ckpt);
    }
    if (val_acc) *val_acc = accuracy(model, val.images, val.labels);
    return model;
}

RunReport run_pipeline(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    stage("config", [&] {
        cfg.validate();
        ensure_dir(cfg.outdir);
        write_file(join_path(cfg.outdir, "config.txt"), cfg.serialize());
    });
    const VitConfig mc = cfg.model_config();

    RunReport rep;
    rep.config = cfg;
    rep.params_before = count_params(mc, StructureMask::all_keep(mc));
    rep.flops_before = count_flops(mc, mc.tokens());

    const SparsityBudget budget =
        stage("budget", [&] { return er_allocate(mc, effective_ratio(cfg.ratio)); });

    if (cfg.dry_run) {
        const StructureMask mask = mask_from_budget(mc, budget);
        rep.params_after = count_params(mc, mask);
        rep.flops_after = count_flops(mc, mask, mc.tokens());
        rep.blocks = outcomes_from_mask(mc, budget, mask);
        rep.wall_seconds = seconds_since(t0);
        stage("report", [&] {
            write_file(join_path(cfg.outdir, "report.txt"), rep.text());
            write_file(join_path(cfg.outdir, "report.csv"), rep.csv());
        });
        return rep;
    }

    Dataset val;
    const Dataset train = stage("data", [&] { return load_split(cfg, &val); });

    double base_acc = 0.0;
    ModelWeights model =
        stage("baseline", [&] { return dense_baseline(cfg, train, val, &base_acc); });
    rep.baseline_acc = base_acc;

    const std::vector<HeadMask> masks = stage("rank", [&] {
        std::string records;
        std::vector<HeadMask> m = masks_for(model, train, cfg, budget, &records);
        write_file(join_path(cfg.outdir, "ranking.txt"), records);
        return m;
    });

    stage("soft-prune", [&] {
        AdmmHyper hp;
        hp.rho = cfg.rho;
        hp.lambda = cfg.lambda;
        hp.eta = cfg.eta;
        hp.epochs = cfg.epochs;
        AdmmState st = admm_init(model, hp);
        const PruneTrace trace =
            run_soft_pruning(model, masks, budget, st, train, val, cfg.batch_size);
        write_file(join_path(cfg.outdir, "prune_trace.csv"), trace.csv());
        save_checkpoint(model, join_path(cfg.outdir, "soft.ckpt"));
    });

    const CompactionReport comp = stage("hard-prune", [&] {
        CompactionReport c = hard_prune_compact(model, masks, budget);
        save_checkpoint(model, join_path(cfg.outdir, "compact.ckpt"));
        return c;
    });

    stage("verify", [&] {
        const ModelWeights reloaded = load_checkpoint(join_path(cfg.outdir, "compact.ckpt"));
        verify_budget(reloaded, budget);
    });

    rep.pruned_acc = stage("finetune", [&] {
        finetune(model, train, val, cfg.resolved_finetune_epochs(), cfg.eta, cfg.batch_size);
        save_checkpoint(model, join_path(cfg.outdir, "final.ckpt"));
        return accuracy(model, val.images, val.labels);
    });

    rep.params_after = count_params(model);
    rep.flops_after = count_flops(mc, mask_from_report(mc, comp), mc.tokens());
    rep.blocks = outcomes_from_report(mc, budget, comp);
    rep.wall_seconds = seconds_since(t0);
    stage("report", [&] {
        write_file(join_path(cfg.outdir, "report.txt"), rep.text());
        write_file(join_path(cfg.outdir, "report.csv"), rep.csv());
    });
    return rep;
}

std::vector<AblationRow> ablate_soft_vs_hard(const ExperimentConfig& cfg,
                                             const std::vector<double>& grid) {
    stage("config", [&] {
        cfg.validate();
        if (grid.empty()) throw ConfigError("sparsity grid must be nonempty");
        for (double s : grid)
            if (!(s >= 0.0 && s < 1.0))
                throw ConfigError("grid sparsity must lie in [0, 1), got " + fmt17(s));
        ensure_dir(cfg.outdir);
    });
    const VitConfig mc = cfg.model_config();
    Dataset val;
    const Dataset train = stage("data", [&] { return load_split(cfg, &val); });
    const ModelWeights baseline =
        stage("baseline", [&] { return dense_baseline(cfg, train, val, nullptr); });

    const std::size_t E = cfg.epochs;
    const std::size_t F = cfg.resolved_finetune_epochs();
    std::vector<AblationRow> rows;
    for (double s : grid) {
        if (s <= 0.0) {
            // Nothing to prune, so both methods degenerate to the same
            // continued training; one trajectory serves both rows.
            ModelWeights m = baseline;
            stage("soft-prune", [&] {
                train_sgd(m, train, val, E, cfg.eta, cfg.batch_size, false);
                finetune(m, train, val, F, cfg.eta, cfg.batch_size);
            });
            const double acc = accuracy(m, val.images, val.labels);
            const std::size_t p = count_params(m);
            rows.push_back({"soft", s, acc, p});
            rows.push_back({"hard", s, acc, p});
            continue;
        }
        const SparsityBudget budget = stage("budget", [&] { return er_allocate(mc, s); });
        const std::vector<HeadMask> masks = stage(
            "rank", [&] { return masks_for(baseline, train, cfg, budget, nullptr); });

        stage("soft-prune", [&] {
            ModelWeights m = baseline;
            AdmmHyper hp;
            hp.rho = cfg.rho;
            hp.lambda = cfg.lambda;
            hp.eta = cfg.eta;
            hp.epochs = E;
            AdmmState st = admm_init(m, hp);
            run_soft_pruning(m, masks, budget, st, train, val, cfg.batch_size);
            hard_prune_compact(m, masks, budget);
            finetune(m, train, val, F, cfg.eta, cfg.batch_size);
            rows.push_back({"soft", s, accuracy(m, val.images, val.labels), count_params(m)});
        });
        stage("hard-prune", [&] {
            // Immediate removal: ranked heads, then weakest channel/hidden
            // groups by L1 norm, followed by the same epoch budget of
            // retraining as the soft leg.
            ModelWeights m = baseline;
            hard_prune_compact(m, masks, budget, GroupScore::l1);
            train_sgd(m, train, val, E, cfg.eta, cfg.batch_size, false);
            finetune(m, train, val, F, cfg.eta, cfg.batch_size);
            rows.push_back({"hard", s, accuracy(m, val.images, val.labels), count_params(m)});
        });
    }
    stage("report",
          [&] { write_file(join_path(cfg.outdir, "ablate_soft_hard.csv"), ablation_csv(rows)); });
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream o;
    o << "method, sparsity, accuracy, params_after\n";
    for (const AblationRow& r : rows)
        o << r.method << ", " << fmt17(r.sparsity) << ", " << fmt17(r.accuracy) << ", "
          << r.params_after << "\n";
    return o.str();
}

std::vector<StabilityRow> ablate_batch_size(const ExperimentConfig& cfg,
                                            const std::vector<std::size_t>& batches) {
    std::vector<std::size_t> bs = batches;
    stage("config", [&] {
        cfg.validate();
        std::sort(bs.begin(), bs.end());
        bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
        if (bs.size() < 2) throw ConfigError("need at least two distinct batch sizes to compare");
        if (bs.front() == 0) throw ConfigError("batch size 0 in grid");
        ensure_dir(cfg.outdir);
    });
    const VitConfig mc = cfg.model_config();
    Dataset val;
    const Dataset train = stage("data", [&] { return load_split(cfg, &val); });
    const ModelWeights baseline =
        stage("baseline", [&] { return dense_baseline(cfg, train, val, nullptr); });

    const std::vector<std::vector<ImportanceScores>> per_b = stage("rank", [&] {
        std::vector<std::vector<ImportanceScores>> out;
        for (std::size_t b : bs) {
            RankingConfig rc;
            rc.batch = b;
            rc.eps = cfg.rank_eps;
            out.push_back(rank_heads(baseline, train, rc));
        }
        return out;
    });

    std::vector<StabilityRow> rows;
    for (std::size_t i = 0; i < bs.size(); ++i)
        for (std::size_t j = i + 1; j < bs.size(); ++j)
            for (std::size_t l = 0; l < mc.L; ++l)
                rows.push_back({l, bs[i], bs[j], rank_stability(per_b[i][l], per_b[j][l])});
    stage("report",
          [&] { write_file(join_path(cfg.outdir, "ablate_batch.csv"), stability_csv(rows)); });
    return rows;
}

std::string stability_csv(const std::vector<StabilityRow>& rows) {
    std::ostringstream o;
    o << "block, batch_small, batch_large, tau\n";
    for (const StabilityRow& r : rows)
        o << r.block << ", " << r.b_small << ", " << r.b_large << ", " << fmt17(r.tau) << "\n";
    return o.str();
}

std::map<double, PruneTrace> ablate_rho(const ExperimentConfig& cfg,
                                        const std::vector<double>& rhos) {
    stage("config", [&] {
        cfg.validate();
        if (rhos.empty()) throw ConfigError("penalty grid must be nonempty");
        for (double r : rhos)
            if (!(r > 0.0)) throw ConfigError("penalty values must be positive, got " + fmt17(r));
        ensure_dir(cfg.outdir);
    });
    const VitConfig mc = cfg.model_config();
    Dataset val;
    const Dataset train = stage("data", [&] { return load_split(cfg, &val); });
    const ModelWeights baseline =
        stage("baseline", [&] { return dense_baseline(cfg, train, val, nullptr); });
    const SparsityBudget budget =
        stage("budget", [&] { return er_allocate(mc, effective_ratio(cfg.ratio)); });
    const std::vector<HeadMask> masks =
        stage("rank", [&] { return masks_for(baseline, train, cfg, budget, nullptr); });

    std::map<double, PruneTrace> out;
    for (double r : rhos) {
        const PruneTrace trace = stage("soft-prune", [&] {
            ModelWeights m = baseline;
            AdmmHyper hp;
            hp.rho = r;
            hp.lambda = cfg.lambda;
            hp.eta = cfg.eta;
            hp.epochs = cfg.epochs;
            AdmmState st = admm_init(m, hp);
            return run_soft_pruning(m, masks, budget, st, train, val, cfg.batch_size);
        });
        stage("report", [&] {
            const std::string name = "rho_" + fmt_short(r) + "_trace.csv";
            write_file(join_path(cfg.outdir, name.c_str()), trace.csv());
        });
        out[r] = trace;
    }
    return out;
}

std::string collate_report(const std::string& outdir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(outdir)) throw DataError("no such output directory: " + outdir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(outdir))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());

    std::ostringstream o;
    o << "== artifact summary: " << outdir << " ==\n";
    for (const std::string& name : names) {
        if (name == "summary.txt") continue;
        const std::string path = (fs::path(outdir) / name).string();
        if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt") {
            o << name << ": checkpoint, " << fs::file_size(path) << " bytes\n";
            continue;
        }
        const std::string content = read_file(path);
        const std::size_t lines =
            static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
        if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
            const std::string header = content.substr(0, content.find('\n'));
            const std::size_t data_rows = lines > 0 ? lines - 1 : 0;
            o << name << ": csv, " << data_rows << " data rows, header: " << header << "\n";
        } else {
            o << name << ": text, " << lines << " lines\n";
        }
    }
    const std::string report_path = (fs::path(outdir) / "report.txt").string();
    if (fs::exists(report_path)) o << "\n" << read_file(report_path);
    const std::string summary = o.str();
    write_file((fs::path(outdir) / "summary.txt").string(), summary);
    return summary;
}

} // namespace gohsp
