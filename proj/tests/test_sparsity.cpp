#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gohsp/errors.hpp"
#include "gohsp/ranking.hpp"
#include "gohsp/rng.hpp"
#include "gohsp/sparsity.hpp"
#include "gohsp/vit.hpp"
#include "oracles.hpp"

using gohsp::HeadMask;
using gohsp::SparsityBudget;
using gohsp::StructureMask;
using gohsp::Tensor;
using gohsp::VitConfig;

namespace {

// Stacks each channel group (three qkv columns + one proj row) into a column
// of a 4d x d matrix, so channel-group projection can be cross-checked with
// plain column projection.
Tensor stack_groups(const Tensor& w_qkv, const Tensor& w_proj) {
    const std::size_t d = w_qkv.rows();
    Tensor g({4 * d, d});
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t third = 0; third < 3; ++third)
            for (std::size_t r = 0; r < d; ++r)
                g.at(third * d + r, c) = w_qkv.at(r, third * d + c);
        for (std::size_t j = 0; j < d; ++j) g.at(3 * d + j, c) = w_proj.at(c, j);
    }
    return g;
}

HeadMask mask_of(std::vector<std::uint8_t> keep) {
    HeadMask m;
    m.keep = std::move(keep);
    return m;
}

VitConfig small_cfg(std::size_t d, std::size_t H) {
    VitConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.d = d;
    cfg.L = 2;
    cfg.H = H;
    cfg.m = 8;
    cfg.C = 2;
    return cfg;
}

} // namespace

TEST_SUITE("sparsity") {

TEST_CASE("group L0 column and row counts") {
    CHECK(gohsp::group_l0_columns(Tensor({3, 4})) == 0);
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    CHECK(gohsp::group_l0_columns(eye) == 3);
    gohsp::Rng rng(41);
    Tensor w = oracle::rand_tensor(rng, {4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
        w.at(i, 0) = 0;
        w.at(i, 2) = 0;
    }
    CHECK(gohsp::group_l0_columns(w) == 2);
    CHECK(gohsp::group_l0_rows(Tensor({2, 5})) == 0);
    Tensor r({3, 2});
    r.at(1, 1) = 0.5;
    CHECK(gohsp::group_l0_rows(r) == 1);
}

TEST_CASE("group L0 heads: either nonzero slice keeps a head live") {
    const std::size_t d = 8;
    const std::vector<int> hc{2, 2, 2, 2};
    Tensor qkv({d, 3 * d});
    Tensor proj({d, d});
    CHECK(gohsp::group_l0_heads(qkv, proj, hc) == 0);

    gohsp::Rng rng(42);
    qkv = oracle::rand_tensor(rng, {d, 3 * d});
    proj = oracle::rand_tensor(rng, {d, d});
    CHECK(gohsp::group_l0_heads(qkv, proj, hc) == 4);

    // Zero head 1 entirely (qkv columns {2,3} in each third, proj rows {2,3}).
    for (std::size_t third = 0; third < 3; ++third)
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 2; c < 4; ++c) qkv.at(r, third * d + c) = 0.0;
    for (std::size_t c = 2; c < 4; ++c)
        for (std::size_t j = 0; j < d; ++j) proj.at(c, j) = 0.0;
    CHECK(gohsp::group_l0_heads(qkv, proj, hc) == 3);

    // Restore a single proj entry: the head counts as live again.
    proj.at(3, 5) = 0.25;
    CHECK(gohsp::group_l0_heads(qkv, proj, hc) == 4);
}

TEST_CASE("column projection identity and zero budgets") {
    gohsp::Rng rng(43);
    Tensor w = oracle::rand_tensor(rng, {4, 4});
    Tensor same = gohsp::project_column_sparse(w, 4);
    for (std::size_t i = 0; i < w.numel(); ++i) CHECK(same.data()[i] == w.data()[i]);
    Tensor zero = gohsp::project_column_sparse(w, 0);
    for (std::size_t i = 0; i < zero.numel(); ++i) CHECK(zero.data()[i] == 0.0);
    CHECK_THROWS_AS(gohsp::project_column_sparse(w, 5), gohsp::BudgetError);
}

TEST_CASE("column projection matches the enumeration oracle exactly") {
    gohsp::Rng rng(44);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t rows = 1 + rng.index(5), cols = 1 + rng.index(5);
        Tensor w = oracle::rand_tensor(rng, {rows, cols});
        for (std::size_t kappa = 0; kappa <= cols; ++kappa) {
            Tensor p = gohsp::project_column_sparse(w, kappa);
            CHECK(oracle::dropped_distance(w, p) ==
                  oracle::project_enum_distance(w, kappa));
            CHECK(gohsp::group_l0_columns(p) <= kappa);
        }
    }
}

TEST_CASE("column projection is idempotent and keeps surviving columns bit-identical") {
    gohsp::Rng rng(45);
    Tensor w = oracle::rand_tensor(rng, {5, 5});
    Tensor once = gohsp::project_column_sparse(w, 2);
    Tensor again = gohsp::project_column_sparse(once, 2);
    for (std::size_t i = 0; i < once.numel(); ++i) CHECK(once.data()[i] == again.data()[i]);
    for (std::size_t j = 0; j < 5; ++j) {
        bool kept = false;
        for (std::size_t i = 0; i < 5; ++i) kept |= once.at(i, j) != 0.0;
        if (kept)
            for (std::size_t i = 0; i < 5; ++i) CHECK(once.at(i, j) == w.at(i, j));
    }
}

TEST_CASE("column projection ties break toward the lower index") {
    Tensor w({2, 3});
    w.at(0, 0) = 1.0; // columns 0 and 2 have equal norm
    w.at(0, 2) = 1.0;
    w.at(1, 1) = 0.5;
    Tensor p = gohsp::project_column_sparse(w, 1);
    CHECK(p.at(0, 0) == 1.0);
    CHECK(p.at(0, 2) == 0.0);
    CHECK(p.at(1, 1) == 0.0);
}

TEST_CASE("masked attention projection with all heads kept reduces to column projection") {
    gohsp::Rng rng(46);
    const std::size_t d = 6;
    Tensor qkv = oracle::rand_tensor(rng, {d, 3 * d});
    Tensor proj = oracle::rand_tensor(rng, {d, d});
    auto out = gohsp::project_masked_attention(qkv, proj, mask_of({1, 1, 1}), 2);
    Tensor direct = gohsp::project_column_sparse(stack_groups(qkv, proj), 2);
    Tensor restacked = stack_groups(out.w_qkv, out.w_proj);
    for (std::size_t i = 0; i < direct.numel(); ++i)
        CHECK(restacked.data()[i] == direct.data()[i]);
}

TEST_CASE("masked attention projection passes removed-head entries through untouched") {
    gohsp::Rng rng(47);
    const std::size_t d = 4; // two heads of width 2
    Tensor qkv = oracle::rand_tensor(rng, {d, 3 * d});
    Tensor proj = oracle::rand_tensor(rng, {d, d});
    const auto mask = mask_of({1, 0});
    auto out = gohsp::project_masked_attention(qkv, proj, mask, 1);

    // Masked head's channels {2,3}: bit-identical to input.
    for (std::size_t c = 2; c < 4; ++c) {
        for (std::size_t third = 0; third < 3; ++third)
            for (std::size_t r = 0; r < d; ++r)
                CHECK(out.w_qkv.at(r, third * d + c) == qkv.at(r, third * d + c));
        for (std::size_t j = 0; j < d; ++j) CHECK(out.w_proj.at(c, j) == proj.at(c, j));
    }
    // Kept-head submatrix: distance equals the enumeration optimum over the
    // kept channels' stacked groups.
    Tensor groups = stack_groups(qkv, proj);
    Tensor kept_sub({4 * d, 2});
    for (std::size_t r = 0; r < 4 * d; ++r)
        for (std::size_t c = 0; c < 2; ++c) kept_sub.at(r, c) = groups.at(r, c);
    Tensor out_sub({4 * d, 2});
    Tensor out_groups = stack_groups(out.w_qkv, out.w_proj);
    for (std::size_t r = 0; r < 4 * d; ++r)
        for (std::size_t c = 0; c < 2; ++c) out_sub.at(r, c) = out_groups.at(r, c);
    CHECK(oracle::dropped_distance(kept_sub, out_sub) ==
          oracle::project_enum_distance(kept_sub, 1));

    CHECK_THROWS_AS(gohsp::project_masked_attention(qkv, proj, mask, 3),
                    gohsp::BudgetError);
}

TEST_CASE("feasible-set projection also zeroes removed-head entries") {
    gohsp::Rng rng(48);
    const std::size_t d = 4;
    Tensor qkv = oracle::rand_tensor(rng, {d, 3 * d});
    Tensor proj = oracle::rand_tensor(rng, {d, d});
    const auto mask = mask_of({1, 0});
    auto strict = gohsp::project_attention_feasible(qkv, proj, mask, 1);
    for (std::size_t c = 2; c < 4; ++c) {
        for (std::size_t third = 0; third < 3; ++third)
            for (std::size_t r = 0; r < d; ++r)
                CHECK(strict.w_qkv.at(r, third * d + c) == 0.0);
        for (std::size_t j = 0; j < d; ++j) CHECK(strict.w_proj.at(c, j) == 0.0);
    }
    // Kept-head region agrees with the pass-through variant bit-for-bit.
    auto loose = gohsp::project_masked_attention(qkv, proj, mask, 1);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t third = 0; third < 3; ++third)
            for (std::size_t r = 0; r < d; ++r)
                CHECK(strict.w_qkv.at(r, third * d + c) ==
                      loose.w_qkv.at(r, third * d + c));
        for (std::size_t j = 0; j < d; ++j)
            CHECK(strict.w_proj.at(c, j) == loose.w_proj.at(c, j));
    }
}

TEST_CASE("masked projection with full budget returns kept region unchanged") {
    gohsp::Rng rng(49);
    const std::size_t d = 6;
    Tensor qkv = oracle::rand_tensor(rng, {d, 3 * d});
    Tensor proj = oracle::rand_tensor(rng, {d, d});
    auto out = gohsp::project_masked_attention(qkv, proj, mask_of({1, 1, 0}), 4);
    for (std::size_t i = 0; i < qkv.numel(); ++i)
        CHECK(out.w_qkv.data()[i] == qkv.data()[i]);
    for (std::size_t i = 0; i < proj.numel(); ++i)
        CHECK(out.w_proj.data()[i] == proj.data()[i]);
}

TEST_CASE("er_allocate rejects out-of-range ratios") {
    const VitConfig cfg = gohsp::desk_config();
    CHECK_THROWS_AS(gohsp::er_allocate(cfg, 0.0), gohsp::ConfigError);
    CHECK_THROWS_AS(gohsp::er_allocate(cfg, 1.0), gohsp::ConfigError);
    CHECK_THROWS_AS(gohsp::er_allocate(cfg, -0.2), gohsp::ConfigError);
}

TEST_CASE("er_allocate near-zero sparsity keeps every unit") {
    const VitConfig cfg = gohsp::desk_config();
    SparsityBudget b = gohsp::er_allocate(cfg, 1e-9);
    for (std::size_t l = 0; l < cfg.L; ++l) {
        CHECK(b.kappa_attn_h[l] == cfg.H);
        CHECK(b.kappa_attn_c[l] == cfg.d);
        CHECK(b.kappa_mlp_c[l] == cfg.m);
    }
}

TEST_CASE("er_allocate gives identical budgets to identically shaped blocks") {
    const VitConfig cfg = gohsp::desk_config();
    SparsityBudget b = gohsp::er_allocate(cfg, 0.4);
    for (std::size_t l = 1; l < cfg.L; ++l) {
        CHECK(b.kappa_attn_h[l] == b.kappa_attn_h[0]);
        CHECK(b.kappa_attn_c[l] == b.kappa_attn_c[0]);
        CHECK(b.kappa_mlp_c[l] == b.kappa_mlp_c[0]);
    }
}

TEST_CASE("er_allocate desk budgets realize the target within two points") {
    const VitConfig cfg = gohsp::desk_config();
    const double dense =
        static_cast<double>(gohsp::count_params(cfg, StructureMask::all_keep(cfg)));
    for (double ratio : {0.3, 0.4, 0.5, 0.8}) {
        SparsityBudget b = gohsp::er_allocate(cfg, ratio);
        StructureMask mask = gohsp::mask_from_budget(cfg, b);
        const double pruned = static_cast<double>(gohsp::count_params(cfg, mask));
        const double realized = 1.0 - pruned / dense;
        CHECK(std::abs(realized - ratio) < 0.02);
        // Surviving params bounded by the target plus one column of rounding
        // slack per matrix.
        const double slack =
            cfg.L * (3.0 * (cfg.d + 1) + cfg.d + (cfg.d + 1) + cfg.d);
        CHECK(pruned <= (1.0 - ratio) * dense + slack);
    }
}

TEST_CASE("er_allocate pinned budgets for the desk shape") {
    const VitConfig cfg = gohsp::desk_config();
    SparsityBudget b40 = gohsp::er_allocate(cfg, 0.4);
    CHECK(b40.kappa_attn_c[0] == 42);
    CHECK(b40.kappa_attn_h[0] == 3);
    CHECK(b40.kappa_mlp_c[0] == 63);
    SparsityBudget b80 = gohsp::er_allocate(cfg, 0.8);
    CHECK(b80.kappa_attn_c[0] == 10);
    CHECK(b80.kappa_attn_h[0] == 1);
    CHECK(b80.kappa_mlp_c[0] == 16);
}

TEST_CASE("er_allocate reproduces published pruned sizes and FLOP reduction bands") {
    // DeiT-Tiny shape at 30%: ~4.0M surviving parameters, FLOPs down 23-31%.
    const VitConfig deit = gohsp::deit_tiny_config();
    SparsityBudget b = gohsp::er_allocate(deit, 0.30);
    CHECK(b.kappa_attn_c[0] == 174);
    CHECK(b.kappa_attn_h[0] == 3);
    CHECK(b.kappa_mlp_c[0] == 434);
    StructureMask mask = gohsp::mask_from_budget(deit, b);
    const std::size_t pruned = gohsp::count_params(deit, mask);
    CHECK(std::abs(static_cast<double>(pruned) - 4.0e6) / 4.0e6 < 0.015);
    const std::size_t t = deit.tokens();
    const double red = 1.0 - static_cast<double>(gohsp::count_flops(deit, mask, t)) /
                                 static_cast<double>(gohsp::count_flops(deit, t));
    CHECK(red > 0.23);
    CHECK(red < 0.31);

    // ViT-Small shape at 40%: ~28.8M surviving parameters.
    const VitConfig small = gohsp::vit_small_config();
    SparsityBudget bs = gohsp::er_allocate(small, 0.40);
    StructureMask ms = gohsp::mask_from_budget(small, bs);
    const std::size_t ps = gohsp::count_params(small, ms);
    CHECK(std::abs(static_cast<double>(ps) - 28.8e6) / 28.8e6 < 0.015);
}

TEST_CASE("mask_from_budget realizes the requested unit counts") {
    const VitConfig cfg = gohsp::desk_config();
    SparsityBudget b = gohsp::er_allocate(cfg, 0.5);
    StructureMask mask = gohsp::mask_from_budget(cfg, b);
    for (std::size_t l = 0; l < cfg.L; ++l) {
        CHECK(mask.kept_channels(l) == b.kappa_attn_c[l]);
        CHECK(mask.kept_hidden(l) == b.kappa_mlp_c[l]);
        std::size_t heads = 0;
        for (auto k : mask.blocks[l].keep_head) heads += k;
        CHECK(heads == b.kappa_attn_h[l]);
    }
}

TEST_CASE("budget validation catches malformed budgets") {
    const VitConfig cfg = small_cfg(8, 2);
    SparsityBudget b;
    b.ratio = 0.5;
    b.kappa_attn_h = {1, 1};
    b.kappa_attn_c = {2, 2};
    b.kappa_mlp_c = {4, 4};
    CHECK_NOTHROW(b.validate(cfg));
    b.kappa_attn_c = {6, 2}; // exceeds one head's channel capacity (4)
    CHECK_THROWS_AS(b.validate(cfg), gohsp::BudgetError);
    b.kappa_attn_c = {2, 2};
    b.kappa_attn_h = {0, 1};
    CHECK_THROWS_AS(b.validate(cfg), gohsp::BudgetError);
    b.kappa_attn_h = {1};
    CHECK_THROWS_AS(b.validate(cfg), gohsp::DimensionError);
    b.kappa_attn_h = {1, 1};
    b.ratio = 1.5;
    CHECK_THROWS_AS(b.validate(cfg), gohsp::ConfigError);
}

TEST_CASE("hidden-unit projection ties an fc1 column to its fc2 row") {
    gohsp::Rng rng(311);
    const std::size_t d = 3, m = 5;
    Tensor fc1 = oracle::rand_tensor(rng, {d, m});
    Tensor fc2 = oracle::rand_tensor(rng, {m, d});

    SUBCASE("with fc2 zeroed it reduces to plain column projection") {
        Tensor fc2z({m, d});
        for (std::size_t k = 1; k <= m; ++k) {
            gohsp::MlpPair p = gohsp::project_hidden_units(fc1, fc2z, k);
            Tensor ref = gohsp::project_column_sparse(fc1, k);
            for (std::size_t i = 0; i < fc1.vec().size(); ++i)
                CHECK(p.w_fc1.vec()[i] == ref.vec()[i]);
            for (double v : p.w_fc2.vec()) CHECK(v == 0.0);
        }
    }

    SUBCASE("survivor groups match enumeration over the stacked matrix") {
        // Stack fc1 column u on top of fc2 row u: joint group == stacked column.
        Tensor stacked({d + d, m});
        for (std::size_t u = 0; u < m; ++u) {
            for (std::size_t i = 0; i < d; ++i) stacked.at(i, u) = fc1.at(i, u);
            for (std::size_t j = 0; j < d; ++j) stacked.at(d + j, u) = fc2.at(u, j);
        }
        for (std::size_t k = 1; k <= m; ++k) {
            gohsp::MlpPair p = gohsp::project_hidden_units(fc1, fc2, k);
            Tensor pstacked({d + d, m});
            for (std::size_t u = 0; u < m; ++u) {
                for (std::size_t i = 0; i < d; ++i) pstacked.at(i, u) = p.w_fc1.at(i, u);
                for (std::size_t j = 0; j < d; ++j) pstacked.at(d + j, u) = p.w_fc2.at(u, j);
            }
            CHECK(oracle::dropped_distance(stacked, pstacked) ==
                  oracle::project_enum_distance(stacked, k));
            CHECK(gohsp::group_l0_columns(p.w_fc1) <= k);
            CHECK(gohsp::group_l0_rows(p.w_fc2) <= k);
        }
    }

    SUBCASE("full budget returns both matrices bit-identical") {
        gohsp::MlpPair p = gohsp::project_hidden_units(fc1, fc2, m);
        for (std::size_t i = 0; i < fc1.vec().size(); ++i) CHECK(p.w_fc1.vec()[i] == fc1.vec()[i]);
        for (std::size_t i = 0; i < fc2.vec().size(); ++i) CHECK(p.w_fc2.vec()[i] == fc2.vec()[i]);
    }

    SUBCASE("a strong fc2 row rescues an fc1 column that would otherwise drop") {
        Tensor a({2, 2}), b({2, 2});
        a.at(0, 0) = 1.0; // unit 0: modest fc1 column, huge fc2 row
        b.at(0, 0) = 10.0;
        a.at(0, 1) = 2.0; // unit 1: stronger fc1 column, empty fc2 row
        gohsp::MlpPair p = gohsp::project_hidden_units(a, b, 1);
        CHECK(p.w_fc1.at(0, 0) == 1.0);
        CHECK(p.w_fc2.at(0, 0) == 10.0);
        CHECK(p.w_fc1.at(0, 1) == 0.0);
    }

    CHECK_THROWS_AS(gohsp::project_hidden_units(fc1, fc2, m + 1), gohsp::BudgetError);
    CHECK_THROWS_AS(gohsp::project_hidden_units(fc1, fc1, 1), gohsp::DimensionError);
}

TEST_CASE("budget record lists all three budgets for the block") {
    const VitConfig cfg = gohsp::desk_config();
    SparsityBudget b = gohsp::er_allocate(cfg, 0.4);
    const std::string rec = gohsp::budget_record(b, 2);
    CHECK(rec == "block 2 | kappa_h 3 | kappa_c 42 | kappa_m 63");
    CHECK_THROWS_AS(gohsp::budget_record(b, 9), gohsp::IndexError);
}

} // TEST_SUITE
