#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gohsp/ranking.hpp"
#include "gohsp/tensor.hpp"
#include "gohsp/vit.hpp"

namespace gohsp {

// Per-block structural budgets: heads kept, attention channels kept (counted
// within kept heads), hidden units kept. Uniform across blocks when produced
// by er_allocate, but stored per block.
struct SparsityBudget {
    double ratio = 0.0; // requested global sparsity
    std::vector<std::size_t> kappa_attn_h;
    std::vector<std::size_t> kappa_attn_c;
    std::vector<std::size_t> kappa_mlp_c;

    void validate(const VitConfig& cfg) const;
};

// Number of columns with at least one nonzero entry.
std::size_t group_l0_columns(const Tensor& w);
// Number of rows with at least one nonzero entry.
std::size_t group_l0_rows(const Tensor& w);

// Number of heads with any nonzero entry in either their qkv column slices or
// their proj row slice (a head is live if any of its weights is).
std::size_t group_l0_heads(const Tensor& w_qkv, const Tensor& w_proj,
                           const std::vector<int>& head_channels);

// Frobenius-nearest matrix with at most kappa_c nonzero columns: keeps the
// kappa_c largest-L2-norm columns bit-identical, zeroes the rest, ties broken
// toward the lower column index. kappa_c > column count -> BudgetError.
Tensor project_column_sparse(const Tensor& w, std::size_t kappa_c);

struct AttentionPair {
    Tensor w_qkv; // d x 3d
    Tensor w_proj; // d x d
};

// Channel-group projection restricted to kept heads. A channel c groups its
// three qkv columns {c, d+c, 2d+c} with proj row c; the kappa_attn_c largest
// such groups (by joint L2 norm) among kept-head channels survive unchanged,
// other kept-head channels are zeroed, and every entry belonging to a masked
// head passes through untouched.
AttentionPair project_masked_attention(const Tensor& w_qkv, const Tensor& w_proj,
                                       const HeadMask& mask, std::size_t kappa_attn_c);

// As above, but masked-head entries are zeroed instead of passing through:
// the projection onto {Z : masked heads zero, kept-head channel groups <=
// kappa_attn_c}. This is the auxiliary-variable projection used by the
// optimizer, where the mask equality is part of the feasible set.
AttentionPair project_attention_feasible(const Tensor& w_qkv, const Tensor& w_proj,
                                         const HeadMask& mask, std::size_t kappa_attn_c);

struct MlpPair {
    Tensor w_fc1; // d x m
    Tensor w_fc2; // m x d
};

// Hidden-unit group projection for the MLP: unit u groups fc1 column u with
// fc2 row u. The kappa_mlp_c largest groups (joint L2 norm) survive
// bit-identical, the rest are zeroed in both matrices, ties broken toward the
// lower unit index. kappa_mlp_c > hidden width -> BudgetError.
MlpPair project_hidden_units(const Tensor& w_fc1, const Tensor& w_fc2,
                             std::size_t kappa_mlp_c);

// Budget allocation from one overall sparsity ratio. Layer densities follow
// the (n_in+n_out)/(n_in*n_out) rule with the attention family treated as one
// d->d unit (its channel groups tie qkv columns to proj rows); a single scale
// factor is bisected so the structurally removed parameter count equals
// ratio * count_params(dense). Densities then convert to integer budgets by
// round-half-up with clamping (at least one head, at least one channel per
// kept head, at most head-capacity channels).
SparsityBudget er_allocate(const VitConfig& cfg, double overall_sparsity);

// Deterministic structural mask realizing the budget for dry-run accounting:
// first kappa_h heads, first kappa_c channels inside those heads, first
// kappa_m hidden units.
StructureMask mask_from_budget(const VitConfig& cfg, const SparsityBudget& budget);

// One text record per block: "block L | kappa_h A | kappa_c B | kappa_m C".
std::string budget_record(const SparsityBudget& budget, std::size_t block);

} // namespace gohsp
