#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gohsp/data.hpp"
#include "gohsp/ranking.hpp"
#include "gohsp/sparsity.hpp"
#include "gohsp/vit.hpp"

namespace gohsp {

// Soft-pruning hyperparameters. By default the learning rate scales the whole
// augmented-Lagrangian gradient (plain gradient descent on the penalized
// objective); eta_scales_loss_only recovers the variant where eta multiplies
// only the loss gradient while the penalty terms step unscaled.
struct AdmmHyper {
    double rho = 1e-3;    // quadratic penalty strength, > 0
    double lambda = 0.01; // masked-entry decay coefficient, >= 0
    double eta = 0.05;    // learning rate, > 0
    std::size_t epochs = 10;
    bool eta_scales_loss_only = false;

    void validate() const; // throws ConfigError
};

// Auxiliary copies (Z) and scaled multipliers (U) for the two constrained
// weight families of every block. Z stays feasible after each projection:
// masked heads zero and channel/hidden group sparsity within budget.
struct AdmmState {
    struct BlockState {
        Tensor z_qkv, z_proj, z_fc1, z_fc2;
        Tensor u_qkv, u_proj, u_fc1, u_fc2;
    };
    std::vector<BlockState> blocks;
    AdmmHyper hp;
    std::size_t epoch = 0;

    void check_model(const ModelWeights& model) const; // shape agreement
};

// Z := W (copies), U := 0.
AdmmState admm_init(const ModelWeights& model, const AdmmHyper& hp);

// One descent step for a constrained attention tensor:
//   W -= eta * (grad + lambda*(1-M).W + rho*(W - Z + U))
// entry_mask M is 1 where the structure is kept. All tensors must agree in
// shape (DimensionError); non-finite gradients raise DivergenceError.
void admm_step_attn(Tensor& w, const Tensor& grad, const Tensor& entry_mask, const Tensor& z,
                    const Tensor& u, const AdmmHyper& hp);
// Same without the mask-decay term (MLP family).
void admm_step_mlp(Tensor& w, const Tensor& grad, const Tensor& z, const Tensor& u,
                   const AdmmHyper& hp);

// Z := projection of W + U onto the feasible set (masked heads zero, kept-head
// channel groups <= kappa_attn_c; hidden-unit groups <= kappa_mlp_c).
void update_z(AdmmState& st, const ModelWeights& model, const std::vector<HeadMask>& masks,
              const SparsityBudget& budget);
// U += W - Z for every constrained tensor.
void update_u(AdmmState& st, const ModelWeights& model);

// Frobenius norm of the attention-family entries the masks drop.
double masked_attn_norm(const ModelWeights& model, const std::vector<HeadMask>& masks);
// Frobenius norms of W - Z over each family.
double primal_residual_attn(const ModelWeights& model, const AdmmState& st);
double primal_residual_mlp(const ModelWeights& model, const AdmmState& st);

struct PruneTrace {
    struct Row {
        std::size_t epoch = 0;
        double loss = 0.0;
        double masked_norm = 0.0;
        double primal_attn = 0.0;
        double primal_mlp = 0.0;
        double val_acc = 0.0;
    };
    std::vector<Row> rows;

    std::string csv() const;
};

// The soft-pruning loop: per minibatch, constrained tensors take the
// augmented-Lagrangian step and every other parameter a plain SGD step; per
// epoch, Z is reprojected, U accumulated, and one trace row recorded.
// Minibatches cover the training set in a fixed order.
PruneTrace run_soft_pruning(ModelWeights& model, const std::vector<HeadMask>& masks,
                            const SparsityBudget& budget, AdmmState& st, const Dataset& train,
                            const Dataset& val, std::size_t batch_size);

// Which structures survived hard pruning, in original dense indices.
struct CompactionReport {
    struct Block {
        std::vector<std::size_t> heads;                      // kept heads, ascending
        std::vector<std::vector<std::size_t>> head_channels; // kept channels per kept head
        std::vector<std::size_t> hidden;                     // kept hidden units, ascending
    };
    std::vector<Block> blocks;
    std::size_t params_before = 0;
    std::size_t params_after = 0;

    std::string text() const;
};

// Norm used to score channel/hidden groups at prune time.
enum class GroupScore { l2, l1 };

// Deletes masked heads, keeps the top-kappa channel groups within kept heads
// (each kept head retains at least its strongest channel so no surviving head
// is starved), and keeps the top-kappa hidden-unit groups; weights, biases,
// and head_channels shrink to exactly the budgeted dimensions. The mask's
// per-block kept-head count must equal the head budget (ContractError).
CompactionReport hard_prune_compact(ModelWeights& model, const std::vector<HeadMask>& masks,
                                    const SparsityBudget& budget,
                                    GroupScore score = GroupScore::l2);

// Same-shape copy of a dense model with everything outside the report's
// keep-sets zeroed (weights and per-unit biases). Its forward pass must match
// the compacted model's.
ModelWeights masked_equivalent(const ModelWeights& dense, const CompactionReport& rep);

struct EpochStat {
    std::size_t epoch = 0;
    double loss = 0.0;
    double val_acc = 0.0;
};

// Plain SGD over fixed-order minibatches. With keep_best, the parameters with
// the highest validation accuracy seen (the incoming model included) are
// restored at the end, so validation accuracy never degrades.
std::vector<EpochStat> train_sgd(ModelWeights& model, const Dataset& train, const Dataset& val,
                                 std::size_t epochs, double eta, std::size_t batch_size,
                                 bool keep_best);

// Post-compaction training: SGD with best-validation restore.
std::vector<EpochStat> finetune(ModelWeights& model, const Dataset& train, const Dataset& val,
                                std::size_t epochs, double eta, std::size_t batch_size);

} // namespace gohsp
