#include "gohsp/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gohsp/errors.hpp"

namespace gohsp {

namespace {

// Indices of the kappa largest values, ties toward the lower index.
std::vector<std::size_t> top_k(const std::vector<double>& vals, std::size_t kappa) {
    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    order.resize(kappa);
    return order;
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

void check_attention_shapes(const Tensor& w_qkv, const Tensor& w_proj) {
    const std::size_t d = w_qkv.rows();
    if (w_qkv.cols() != 3 * d || w_proj.rows() != d || w_proj.cols() != d)
        throw DimensionError("attention pair must be d x 3d and d x d");
}

// Joint L2 norm^2 of channel c's group: three qkv columns plus one proj row.
double channel_group_sq(const Tensor& w_qkv, const Tensor& w_proj, std::size_t c) {
    const std::size_t d = w_qkv.rows();
    double sq = 0;
    for (std::size_t third = 0; third < 3; ++third)
        for (std::size_t r = 0; r < d; ++r) {
            const double v = w_qkv.at(r, third * d + c);
            sq += v * v;
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double v = w_proj.at(c, j);
        sq += v * v;
    }
    return sq;
}

void zero_channel(AttentionPair& p, std::size_t c) {
    const std::size_t d = p.w_qkv.rows();
    for (std::size_t third = 0; third < 3; ++third)
        for (std::size_t r = 0; r < d; ++r) p.w_qkv.at(r, third * d + c) = 0.0;
    for (std::size_t j = 0; j < d; ++j) p.w_proj.at(c, j) = 0.0;
}

AttentionPair project_attention_impl(const Tensor& w_qkv, const Tensor& w_proj,
                                     const HeadMask& mask, std::size_t kappa_attn_c,
                                     bool zero_masked) {
    check_attention_shapes(w_qkv, w_proj);
    ensure_finite(w_qkv, "w_qkv");
    ensure_finite(w_proj, "w_proj");
    const std::size_t d = w_qkv.rows();
    const std::size_t H = mask.keep.size();
    if (H == 0 || d % H != 0)
        throw DimensionError("mask head count incompatible with matrix width");
    const std::size_t dh = d / H;

    std::vector<std::size_t> kept_channels;
    for (std::size_t h = 0; h < H; ++h)
        if (mask.keep[h])
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) kept_channels.push_back(c);
    if (kappa_attn_c > kept_channels.size())
        throw BudgetError("channel budget " + std::to_string(kappa_attn_c) +
                          " exceeds the " + std::to_string(kept_channels.size()) +
                          " kept-head channels");

    std::vector<double> sq(kept_channels.size());
    for (std::size_t i = 0; i < kept_channels.size(); ++i)
        sq[i] = channel_group_sq(w_qkv, w_proj, kept_channels[i]);
    const auto winners = top_k(sq, kappa_attn_c);
    std::vector<std::uint8_t> survive(d, 0);
    for (std::size_t w : winners) survive[kept_channels[w]] = 1;

    AttentionPair out{w_qkv, w_proj};
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            if (mask.keep[h]) {
                if (!survive[c]) zero_channel(out, c);
            } else if (zero_masked) {
                zero_channel(out, c);
            }
        }
    }
    return out;
}

} // namespace

void SparsityBudget::validate(const VitConfig& cfg) const {
    cfg.validate();
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("sparsity ratio must lie in (0,1)");
    if (kappa_attn_h.size() != cfg.L || kappa_attn_c.size() != cfg.L ||
        kappa_mlp_c.size() != cfg.L)
        throw DimensionError("budget vectors must have one entry per block");
    const std::size_t dh = cfg.head_dim();
    for (std::size_t l = 0; l < cfg.L; ++l) {
        if (kappa_attn_h[l] < 1 || kappa_attn_h[l] > cfg.H)
            throw BudgetError("head budget out of range at block " + std::to_string(l));
        if (kappa_attn_c[l] < 1 || kappa_attn_c[l] > kappa_attn_h[l] * dh)
            throw BudgetError("channel budget out of range at block " + std::to_string(l));
        if (kappa_mlp_c[l] < 1 || kappa_mlp_c[l] > cfg.m)
            throw BudgetError("hidden budget out of range at block " + std::to_string(l));
    }
}

std::size_t group_l0_columns(const Tensor& w) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < w.cols(); ++j) {
        for (std::size_t i = 0; i < w.rows(); ++i) {
            if (w.at(i, j) != 0.0) {
                ++n;
                break;
            }
        }
    }
    return n;
}

std::size_t group_l0_rows(const Tensor& w) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            if (w.at(i, j) != 0.0) {
                ++n;
                break;
            }
        }
    }
    return n;
}

std::size_t group_l0_heads(const Tensor& w_qkv, const Tensor& w_proj,
                           const std::vector<int>& head_channels) {
    const std::size_t ct = w_proj.rows();
    if (w_qkv.cols() != 3 * ct) throw DimensionError("qkv/proj widths disagree");
    std::size_t total = 0;
    for (int c : head_channels) total += static_cast<std::size_t>(c);
    if (total != ct) throw DimensionError("head channels do not cover the matrices");

    std::size_t live = 0, off = 0;
    for (int chw : head_channels) {
        const std::size_t ch = static_cast<std::size_t>(chw);
        bool nonzero = false;
        for (std::size_t c = off; c < off + ch && !nonzero; ++c) {
            for (std::size_t third = 0; third < 3 && !nonzero; ++third)
                for (std::size_t r = 0; r < w_qkv.rows(); ++r)
                    if (w_qkv.at(r, third * ct + c) != 0.0) {
                        nonzero = true;
                        break;
                    }
            for (std::size_t j = 0; j < w_proj.cols() && !nonzero; ++j)
                if (w_proj.at(c, j) != 0.0) nonzero = true;
        }
        if (nonzero) ++live;
        off += ch;
    }
    return live;
}

Tensor project_column_sparse(const Tensor& w, std::size_t kappa_c) {
    if (kappa_c > w.cols())
        throw BudgetError("column budget " + std::to_string(kappa_c) + " exceeds " +
                          std::to_string(w.cols()) + " columns");
    ensure_finite(w, "projection input");
    std::vector<double> sq(w.cols(), 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j)
        for (std::size_t i = 0; i < w.rows(); ++i) sq[j] += w.at(i, j) * w.at(i, j);
    const auto winners = top_k(sq, kappa_c);
    std::vector<std::uint8_t> survive(w.cols(), 0);
    for (std::size_t j : winners) survive[j] = 1;
    Tensor out = w;
    for (std::size_t j = 0; j < w.cols(); ++j)
        if (!survive[j])
            for (std::size_t i = 0; i < w.rows(); ++i) out.at(i, j) = 0.0;
    return out;
}

AttentionPair project_masked_attention(const Tensor& w_qkv, const Tensor& w_proj,
                                       const HeadMask& mask, std::size_t kappa_attn_c) {
    return project_attention_impl(w_qkv, w_proj, mask, kappa_attn_c, false);
}

AttentionPair project_attention_feasible(const Tensor& w_qkv, const Tensor& w_proj,
                                         const HeadMask& mask, std::size_t kappa_attn_c) {
    return project_attention_impl(w_qkv, w_proj, mask, kappa_attn_c, true);
}

MlpPair project_hidden_units(const Tensor& w_fc1, const Tensor& w_fc2,
                             std::size_t kappa_mlp_c) {
    const std::size_t m = w_fc1.cols();
    if (w_fc2.rows() != m || w_fc1.rows() != w_fc2.cols())
        throw DimensionError("MLP pair must be d x m and m x d");
    if (kappa_mlp_c > m)
        throw BudgetError("hidden budget " + std::to_string(kappa_mlp_c) + " exceeds " +
                          std::to_string(m) + " hidden units");
    ensure_finite(w_fc1, "w_fc1");
    ensure_finite(w_fc2, "w_fc2");

    std::vector<double> sq(m, 0.0);
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t i = 0; i < w_fc1.rows(); ++i) sq[u] += w_fc1.at(i, u) * w_fc1.at(i, u);
        for (std::size_t j = 0; j < w_fc2.cols(); ++j) sq[u] += w_fc2.at(u, j) * w_fc2.at(u, j);
    }
    const auto winners = top_k(sq, kappa_mlp_c);
    std::vector<std::uint8_t> survive(m, 0);
    for (std::size_t u : winners) survive[u] = 1;

    MlpPair out{w_fc1, w_fc2};
    for (std::size_t u = 0; u < m; ++u) {
        if (survive[u]) continue;
        for (std::size_t i = 0; i < w_fc1.rows(); ++i) out.w_fc1.at(i, u) = 0.0;
        for (std::size_t j = 0; j < w_fc2.cols(); ++j) out.w_fc2.at(u, j) = 0.0;
    }
    return out;
}

SparsityBudget er_allocate(const VitConfig& cfg, double overall_sparsity) {
    cfg.validate();
    if (!(overall_sparsity > 0.0 && overall_sparsity < 1.0))
        throw ConfigError("overall sparsity must lie in (0,1)");

    const double d = static_cast<double>(cfg.d);
    const double m = static_cast<double>(cfg.m);
    const double L = static_cast<double>(cfg.L);
    const double total =
        static_cast<double>(count_params(cfg, StructureMask::all_keep(cfg)));
    const double target_removed = overall_sparsity * total;

    // Densities under a shared scale t; attention is one d->d family, the MLP
    // pair shares the fc1 density (fc2 rows are tied to fc1 columns).
    auto densities = [&](double t) {
        const double a_attn = std::min(1.0, t * 2.0 / d);
        const double a_mlp = std::min(1.0, t * (d + m) / (d * m));
        return std::pair<double, double>(a_attn, a_mlp);
    };
    // Structural removal: a dropped channel takes 3 qkv columns (with biases)
    // and a proj row; a dropped hidden unit takes an fc1 column (with bias)
    // and an fc2 row.
    auto removed = [&](double t) {
        const auto [a_attn, a_mlp] = densities(t);
        return L * (3.0 * (d + 1.0) * d * (1.0 - a_attn) + d * d * (1.0 - a_attn) +
                    (d + 1.0) * m * (1.0 - a_mlp) + d * m * (1.0 - a_mlp));
    };

    double lo = 0.0, hi = 10.0 * std::max(d, m);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (removed(mid) > target_removed)
            lo = mid;
        else
            hi = mid;
    }
    const auto [a_attn, a_mlp] = densities(0.5 * (lo + hi));

    const std::size_t dh = cfg.head_dim();
    std::size_t kh = std::max<std::size_t>(1, round_half_up(cfg.H * a_attn));
    kh = std::min(kh, cfg.H);
    std::size_t kc = round_half_up(cfg.d * a_attn);
    kc = std::max(std::min(kc, kh * dh), kh);
    kc = std::max<std::size_t>(1, std::min(kc, cfg.d));
    std::size_t km = std::max<std::size_t>(1, std::min(round_half_up(cfg.m * a_mlp), cfg.m));

    SparsityBudget b;
    b.ratio = overall_sparsity;
    b.kappa_attn_h.assign(cfg.L, kh);
    b.kappa_attn_c.assign(cfg.L, kc);
    b.kappa_mlp_c.assign(cfg.L, km);
    b.validate(cfg);
    return b;
}

StructureMask mask_from_budget(const VitConfig& cfg, const SparsityBudget& budget) {
    budget.validate(cfg);
    StructureMask mask = StructureMask::all_keep(cfg);
    const std::size_t dh = cfg.head_dim();
    for (std::size_t l = 0; l < cfg.L; ++l) {
        auto& blk = mask.blocks[l];
        std::fill(blk.keep_head.begin(), blk.keep_head.end(), 0);
        std::fill(blk.keep_channel.begin(), blk.keep_channel.end(), 0);
        std::fill(blk.keep_hidden.begin(), blk.keep_hidden.end(), 0);
        for (std::size_t h = 0; h < budget.kappa_attn_h[l]; ++h) blk.keep_head[h] = 1;
        std::size_t assigned = 0;
        for (std::size_t h = 0; h < budget.kappa_attn_h[l]; ++h)
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
                if (assigned == budget.kappa_attn_c[l]) break;
                blk.keep_channel[c] = 1;
                ++assigned;
            }
        for (std::size_t u = 0; u < budget.kappa_mlp_c[l]; ++u) blk.keep_hidden[u] = 1;
    }
    return mask;
}

std::string budget_record(const SparsityBudget& budget, std::size_t block) {
    if (block >= budget.kappa_attn_h.size()) throw IndexError("budget has no such block");
    return "block " + std::to_string(block) + " | kappa_h " +
           std::to_string(budget.kappa_attn_h[block]) + " | kappa_c " +
           std::to_string(budget.kappa_attn_c[block]) + " | kappa_m " +
           std::to_string(budget.kappa_mlp_c[block]);
}

} // namespace gohsp
