#include "gohsp/admm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <unordered_map>

#include "gohsp/errors.hpp"

namespace gohsp {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(what) + ": tensor shapes disagree");
}

void check_grad_finite(const Tensor& g, const std::string& context) {
    for (double v : g.vec())
        if (!std::isfinite(v)) throw DivergenceError("non-finite gradient " + context);
}

double frob_sq_diff(const Tensor& a, const Tensor& b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.vec().size(); ++i) {
        const double d = a.vec()[i] - b.vec()[i];
        sq += d * d;
    }
    return sq;
}

Tensor plus(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "plus");
    Tensor out = a;
    for (std::size_t i = 0; i < out.vec().size(); ++i) out.vec()[i] += b.vec()[i];
    return out;
}

// Indices of the kappa best-scoring entries, ties toward the lower index.
std::vector<std::size_t> top_k_indices(const std::vector<double>& score, std::size_t kappa) {
    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    order.resize(kappa);
    return order;
}

double channel_score(const BlockWeights& bw, std::size_t c, std::size_t d, GroupScore kind) {
    double s = 0.0;
    for (std::size_t third = 0; third < 3; ++third)
        for (std::size_t r = 0; r < d; ++r) {
            const double v = bw.w_qkv.at(r, third * d + c);
            s += kind == GroupScore::l2 ? v * v : std::fabs(v);
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double v = bw.w_proj.at(c, j);
        s += kind == GroupScore::l2 ? v * v : std::fabs(v);
    }
    return s;
}

double hidden_score(const BlockWeights& bw, std::size_t u, GroupScore kind) {
    double s = 0.0;
    for (std::size_t i = 0; i < bw.w_fc1.rows(); ++i) {
        const double v = bw.w_fc1.at(i, u);
        s += kind == GroupScore::l2 ? v * v : std::fabs(v);
    }
    for (std::size_t j = 0; j < bw.w_fc2.cols(); ++j) {
        const double v = bw.w_fc2.at(u, j);
        s += kind == GroupScore::l2 ? v * v : std::fabs(v);
    }
    return s;
}

// Family roles of the constrained per-block tensors, resolved by address.
struct FamilyMap {
    struct Entry {
        std::size_t block;
        int role; // 0 qkv, 1 proj, 2 fc1, 3 fc2
    };
    std::unordered_map<const Tensor*, Entry> entries;

    explicit FamilyMap(ModelWeights& model) {
        for (std::size_t l = 0; l < model.blocks.size(); ++l) {
            entries[&model.blocks[l].w_qkv] = {l, 0};
            entries[&model.blocks[l].w_proj] = {l, 1};
            entries[&model.blocks[l].w_fc1] = {l, 2};
            entries[&model.blocks[l].w_fc2] = {l, 3};
        }
    }
};

// One pass over the training set in fixed batch order. `apply` consumes the
// parameter gradients for one minibatch. Returns the sample-weighted loss.
double run_epoch(ModelWeights& model, const Dataset& train, std::size_t batch_size,
                 std::size_t epoch,
                 const std::function<void(const std::vector<Tensor*>&, const std::vector<Tensor>&,
                                          const std::vector<Tape::NodeId>&)>& apply) {
    double loss_sum = 0.0;
    std::size_t seen = 0, step = 0;
    for (std::size_t beg = 0; beg < train.size(); beg += batch_size, ++step) {
        const std::size_t end = std::min(beg + batch_size, train.size());
        const std::string where =
            "at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
        Dataset b = slice_batch(train, beg, end);
        try {
            ForwardPass fp = forward(model, b.images, &b.labels);
            const double loss = fp.tape.value(fp.loss).at(0, 0);
            if (!std::isfinite(loss)) throw DivergenceError("non-finite loss " + where);
            std::vector<Tensor> grads = fp.tape.backward(fp.loss);
            std::vector<Tensor*> ps = param_tensors(model);
            const std::vector<std::string> names = param_names(model);
            for (std::size_t i = 0; i < ps.size(); ++i) {
                const Tensor& g = grads[static_cast<std::size_t>(fp.params[i])];
                check_grad_finite(g, "in " + names[i] + " " + where);
            }
            apply(ps, grads, fp.params);
            loss_sum += loss * static_cast<double>(end - beg);
        } catch (const NumericError& e) {
            // Non-finite activations after an update mean the run diverged.
            throw DivergenceError(std::string(e.what()) + " " + where);
        }
        seen += end - beg;
    }
    if (seen == 0) throw ContractError("training set is empty");
    return loss_sum / static_cast<double>(seen);
}

double val_accuracy(const ModelWeights& model, const Dataset& val, std::size_t epoch) {
    try {
        return accuracy(model, val.images, val.labels);
    } catch (const NumericError& e) {
        throw DivergenceError(std::string(e.what()) + " during validation after epoch " +
                              std::to_string(epoch));
    }
}

void sgd_step(Tensor& w, const Tensor& g, double eta) {
    if (g.vec().empty()) return; // parameter unused by this loss
    check_same_shape(w, g, "sgd step");
    for (std::size_t i = 0; i < w.vec().size(); ++i) w.vec()[i] -= eta * g.vec()[i];
}

void check_masks(const ModelWeights& model, const std::vector<HeadMask>& masks,
                 const SparsityBudget& budget) {
    if (masks.size() != model.cfg.L)
        throw DimensionError("expected one head mask per block");
    for (std::size_t l = 0; l < masks.size(); ++l) {
        if (masks[l].keep.size() != model.cfg.H)
            throw DimensionError("head mask width disagrees with the model");
        if (masks[l].kept_count() != budget.kappa_attn_h[l])
            throw ContractError("mask keeps " + std::to_string(masks[l].kept_count()) +
                                " heads but the budget allots " +
                                std::to_string(budget.kappa_attn_h[l]) + " at block " +
                                std::to_string(l));
    }
}

void require_dense_geometry(const ModelWeights& model, const char* what) {
    const std::size_t dh = model.cfg.head_dim();
    for (const BlockWeights& bw : model.blocks) {
        if (bw.head_channels.size() != model.cfg.H) throw ContractError(what);
        for (int w : bw.head_channels)
            if (static_cast<std::size_t>(w) != dh) throw ContractError(what);
        if (bw.hidden() != model.cfg.m) throw ContractError(what);
    }
}

} // namespace

void AdmmHyper::validate() const {
    if (!(rho > 0.0)) throw ConfigError("penalty rho must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("mask decay lambda must be non-negative");
    if (!(eta > 0.0)) throw ConfigError("learning rate eta must be positive");
}

void AdmmState::check_model(const ModelWeights& model) const {
    if (blocks.size() != model.blocks.size())
        throw DimensionError("optimizer state block count disagrees with the model");
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const BlockWeights& bw = model.blocks[l];
        check_same_shape(blocks[l].z_qkv, bw.w_qkv, "z_qkv");
        check_same_shape(blocks[l].z_proj, bw.w_proj, "z_proj");
        check_same_shape(blocks[l].z_fc1, bw.w_fc1, "z_fc1");
        check_same_shape(blocks[l].z_fc2, bw.w_fc2, "z_fc2");
        check_same_shape(blocks[l].u_qkv, bw.w_qkv, "u_qkv");
        check_same_shape(blocks[l].u_proj, bw.w_proj, "u_proj");
        check_same_shape(blocks[l].u_fc1, bw.w_fc1, "u_fc1");
        check_same_shape(blocks[l].u_fc2, bw.w_fc2, "u_fc2");
    }
}

AdmmState admm_init(const ModelWeights& model, const AdmmHyper& hp) {
    model.validate();
    hp.validate();
    AdmmState st;
    st.hp = hp;
    st.blocks.reserve(model.blocks.size());
    for (const BlockWeights& bw : model.blocks) {
        AdmmState::BlockState bs;
        bs.z_qkv = bw.w_qkv;
        bs.z_proj = bw.w_proj;
        bs.z_fc1 = bw.w_fc1;
        bs.z_fc2 = bw.w_fc2;
        bs.u_qkv = Tensor({bw.w_qkv.rows(), bw.w_qkv.cols()});
        bs.u_proj = Tensor({bw.w_proj.rows(), bw.w_proj.cols()});
        bs.u_fc1 = Tensor({bw.w_fc1.rows(), bw.w_fc1.cols()});
        bs.u_fc2 = Tensor({bw.w_fc2.rows(), bw.w_fc2.cols()});
        st.blocks.push_back(std::move(bs));
    }
    return st;
}

void admm_step_attn(Tensor& w, const Tensor& grad, const Tensor& entry_mask, const Tensor& z,
                    const Tensor& u, const AdmmHyper& hp) {
    check_same_shape(w, grad, "attention step");
    check_same_shape(w, entry_mask, "attention step mask");
    check_same_shape(w, z, "attention step z");
    check_same_shape(w, u, "attention step u");
    check_grad_finite(grad, "in attention weight update");
    for (std::size_t i = 0; i < w.vec().size(); ++i) {
        const double wi = w.vec()[i];
        const double penalty = hp.lambda * (1.0 - entry_mask.vec()[i]) * wi +
                               hp.rho * (wi - z.vec()[i] + u.vec()[i]);
        w.vec()[i] -= hp.eta_scales_loss_only ? hp.eta * grad.vec()[i] + penalty
                                              : hp.eta * (grad.vec()[i] + penalty);
    }
}

void admm_step_mlp(Tensor& w, const Tensor& grad, const Tensor& z, const Tensor& u,
                   const AdmmHyper& hp) {
    check_same_shape(w, grad, "mlp step");
    check_same_shape(w, z, "mlp step z");
    check_same_shape(w, u, "mlp step u");
    check_grad_finite(grad, "in mlp weight update");
    for (std::size_t i = 0; i < w.vec().size(); ++i) {
        const double penalty = hp.rho * (w.vec()[i] - z.vec()[i] + u.vec()[i]);
        w.vec()[i] -= hp.eta_scales_loss_only ? hp.eta * grad.vec()[i] + penalty
                                              : hp.eta * (grad.vec()[i] + penalty);
    }
}

void update_z(AdmmState& st, const ModelWeights& model, const std::vector<HeadMask>& masks,
              const SparsityBudget& budget) {
    st.check_model(model);
    budget.validate(model.cfg);
    if (masks.size() != model.blocks.size())
        throw DimensionError("expected one head mask per block");
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const BlockWeights& bw = model.blocks[l];
        AdmmState::BlockState& bs = st.blocks[l];
        AttentionPair za = project_attention_feasible(
            plus(bw.w_qkv, bs.u_qkv), plus(bw.w_proj, bs.u_proj), masks[l],
            budget.kappa_attn_c[l]);
        bs.z_qkv = std::move(za.w_qkv);
        bs.z_proj = std::move(za.w_proj);
        MlpPair zm = project_hidden_units(plus(bw.w_fc1, bs.u_fc1), plus(bw.w_fc2, bs.u_fc2),
                                          budget.kappa_mlp_c[l]);
        bs.z_fc1 = std::move(zm.w_fc1);
        bs.z_fc2 = std::move(zm.w_fc2);
    }
}

void update_u(AdmmState& st, const ModelWeights& model) {
    st.check_model(model);
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const BlockWeights& bw = model.blocks[l];
        AdmmState::BlockState& bs = st.blocks[l];
        auto accumulate = [](Tensor& u, const Tensor& w, const Tensor& z) {
            for (std::size_t i = 0; i < u.vec().size(); ++i)
                u.vec()[i] += w.vec()[i] - z.vec()[i];
        };
        accumulate(bs.u_qkv, bw.w_qkv, bs.z_qkv);
        accumulate(bs.u_proj, bw.w_proj, bs.z_proj);
        accumulate(bs.u_fc1, bw.w_fc1, bs.z_fc1);
        accumulate(bs.u_fc2, bw.w_fc2, bs.z_fc2);
    }
}

double masked_attn_norm(const ModelWeights& model, const std::vector<HeadMask>& masks) {
    if (masks.size() != model.blocks.size())
        throw DimensionError("expected one head mask per block");
    double sq = 0.0;
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const BlockWeights& bw = model.blocks[l];
        const HeadMask& m = masks[l];
        check_same_shape(bw.w_qkv, m.m_qkv, "masked norm qkv");
        check_same_shape(bw.w_proj, m.m_proj, "masked norm proj");
        for (std::size_t i = 0; i < bw.w_qkv.vec().size(); ++i) {
            const double v = (1.0 - m.m_qkv.vec()[i]) * bw.w_qkv.vec()[i];
            sq += v * v;
        }
        for (std::size_t i = 0; i < bw.w_proj.vec().size(); ++i) {
            const double v = (1.0 - m.m_proj.vec()[i]) * bw.w_proj.vec()[i];
            sq += v * v;
        }
    }
    return std::sqrt(sq);
}

double primal_residual_attn(const ModelWeights& model, const AdmmState& st) {
    st.check_model(model);
    double sq = 0.0;
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        sq += frob_sq_diff(model.blocks[l].w_qkv, st.blocks[l].z_qkv);
        sq += frob_sq_diff(model.blocks[l].w_proj, st.blocks[l].z_proj);
    }
    return std::sqrt(sq);
}

double primal_residual_mlp(const ModelWeights& model, const AdmmState& st) {
    st.check_model(model);
    double sq = 0.0;
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        sq += frob_sq_diff(model.blocks[l].w_fc1, st.blocks[l].z_fc1);
        sq += frob_sq_diff(model.blocks[l].w_fc2, st.blocks[l].z_fc2);
    }
    return std::sqrt(sq);
}

std::string PruneTrace::csv() const {
    std::string out =
        "epoch, loss, masked_norm, primal_residual_attn, primal_residual_mlp, val_acc\n";
    char buf[256];
    for (const Row& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu, %.17g, %.17g, %.17g, %.17g, %.17g\n", r.epoch,
                      r.loss, r.masked_norm, r.primal_attn, r.primal_mlp, r.val_acc);
        out += buf;
    }
    return out;
}

PruneTrace run_soft_pruning(ModelWeights& model, const std::vector<HeadMask>& masks,
                            const SparsityBudget& budget, AdmmState& st, const Dataset& train,
                            const Dataset& val, std::size_t batch_size) {
    model.validate();
    st.hp.validate();
    st.check_model(model);
    budget.validate(model.cfg);
    check_masks(model, masks, budget);
    require_dense_geometry(model, "soft pruning expects an uncompacted model");
    train.validate();
    val.validate();
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (val.size() == 0) throw ContractError("validation set is empty");

    const FamilyMap fam(model);
    PruneTrace trace;
    for (std::size_t e = 0; e < st.hp.epochs; ++e) {
        const double mean_loss = run_epoch(
            model, train, batch_size, st.epoch + 1,
            [&](const std::vector<Tensor*>& ps, const std::vector<Tensor>& grads,
                const std::vector<Tape::NodeId>& ids) {
                for (std::size_t i = 0; i < ps.size(); ++i) {
                    const Tensor& g = grads[static_cast<std::size_t>(ids[i])];
                    const auto it = fam.entries.find(ps[i]);
                    if (it == fam.entries.end()) {
                        sgd_step(*ps[i], g, st.hp.eta);
                        continue;
                    }
                    const std::size_t l = it->second.block;
                    AdmmState::BlockState& bs = st.blocks[l];
                    switch (it->second.role) {
                    case 0:
                        admm_step_attn(*ps[i], g, masks[l].m_qkv, bs.z_qkv, bs.u_qkv, st.hp);
                        break;
                    case 1:
                        admm_step_attn(*ps[i], g, masks[l].m_proj, bs.z_proj, bs.u_proj, st.hp);
                        break;
                    case 2:
                        admm_step_mlp(*ps[i], g, bs.z_fc1, bs.u_fc1, st.hp);
                        break;
                    default:
                        admm_step_mlp(*ps[i], g, bs.z_fc2, bs.u_fc2, st.hp);
                        break;
                    }
                }
            });
        update_z(st, model, masks, budget);
        update_u(st, model);
        st.epoch += 1;

        PruneTrace::Row row;
        row.epoch = st.epoch;
        row.loss = mean_loss;
        row.masked_norm = masked_attn_norm(model, masks);
        row.primal_attn = primal_residual_attn(model, st);
        row.primal_mlp = primal_residual_mlp(model, st);
        row.val_acc = val_accuracy(model, val, st.epoch);
        trace.rows.push_back(row);
    }
    return trace;
}

std::string CompactionReport::text() const {
    std::string out;
    char buf[160];
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        std::size_t channels = 0;
        for (const auto& ch : blocks[l].head_channels) channels += ch.size();
        std::snprintf(buf, sizeof(buf), "block %zu | heads %zu | channels %zu | hidden %zu\n", l,
                      blocks[l].heads.size(), channels, blocks[l].hidden.size());
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "params %zu -> %zu\n", params_before, params_after);
    out += buf;
    return out;
}

CompactionReport hard_prune_compact(ModelWeights& model, const std::vector<HeadMask>& masks,
                                    const SparsityBudget& budget, GroupScore score) {
    model.validate();
    budget.validate(model.cfg);
    check_masks(model, masks, budget);
    require_dense_geometry(model, "hard pruning expects an uncompacted model");

    const VitConfig& cfg = model.cfg;
    const std::size_t d = cfg.d;
    const std::size_t dh = cfg.head_dim();

    CompactionReport rep;
    rep.params_before = count_params(model);
    rep.blocks.resize(cfg.L);

    for (std::size_t l = 0; l < cfg.L; ++l) {
        BlockWeights& bw = model.blocks[l];
        CompactionReport::Block& rb = rep.blocks[l];
        const std::size_t kappa_c = budget.kappa_attn_c[l];
        const std::size_t kappa_m = budget.kappa_mlp_c[l];

        for (std::size_t h = 0; h < cfg.H; ++h)
            if (masks[l].keep[h]) rb.heads.push_back(h);

        // Channel selection: every kept head first retains its strongest
        // channel, then the remaining budget fills greedily across heads.
        std::vector<double> cscore(d, 0.0);
        for (std::size_t h : rb.heads)
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
                cscore[c] = channel_score(bw, c, d, score);
        std::vector<std::uint8_t> selected(d, 0);
        for (std::size_t h : rb.heads) {
            std::size_t best = h * dh;
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
                if (cscore[c] > cscore[best]) best = c;
            selected[best] = 1;
        }
        std::vector<std::size_t> pool;
        for (std::size_t h : rb.heads)
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
                if (!selected[c]) pool.push_back(c);
        std::stable_sort(pool.begin(), pool.end(),
                         [&](std::size_t a, std::size_t b) { return cscore[a] > cscore[b]; });
        for (std::size_t i = 0; i + rb.heads.size() < kappa_c && i < pool.size(); ++i)
            selected[pool[i]] = 1;

        rb.head_channels.resize(rb.heads.size());
        std::vector<std::size_t> order; // kept channels, head-major ascending
        for (std::size_t i = 0; i < rb.heads.size(); ++i) {
            const std::size_t h = rb.heads[i];
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c)
                if (selected[c]) {
                    rb.head_channels[i].push_back(c);
                    order.push_back(c);
                }
        }

        // Hidden-unit selection by joint fc1-column/fc2-row score.
        std::vector<double> hscore(cfg.m, 0.0);
        for (std::size_t u = 0; u < cfg.m; ++u) hscore[u] = hidden_score(bw, u, score);
        rb.hidden = top_k_indices(hscore, kappa_m);
        std::sort(rb.hidden.begin(), rb.hidden.end());

        // Rebuild the block tensors at the compacted dimensions.
        const std::size_t ct = order.size();
        Tensor w_qkv({d, 3 * ct}), b_qkv({3 * ct});
        Tensor w_proj({ct, d});
        for (std::size_t pos = 0; pos < ct; ++pos) {
            const std::size_t c = order[pos];
            for (std::size_t third = 0; third < 3; ++third) {
                for (std::size_t r = 0; r < d; ++r)
                    w_qkv.at(r, third * ct + pos) = bw.w_qkv.at(r, third * d + c);
                b_qkv[third * ct + pos] = bw.b_qkv[third * d + c];
            }
            for (std::size_t j = 0; j < d; ++j) w_proj.at(pos, j) = bw.w_proj.at(c, j);
        }
        Tensor w_fc1({d, kappa_m}), b_fc1({kappa_m});
        Tensor w_fc2({kappa_m, d});
        for (std::size_t pos = 0; pos < kappa_m; ++pos) {
            const std::size_t u = rb.hidden[pos];
            for (std::size_t i = 0; i < d; ++i) w_fc1.at(i, pos) = bw.w_fc1.at(i, u);
            b_fc1[pos] = bw.b_fc1[u];
            for (std::size_t j = 0; j < d; ++j) w_fc2.at(pos, j) = bw.w_fc2.at(u, j);
        }
        bw.w_qkv = std::move(w_qkv);
        bw.b_qkv = std::move(b_qkv);
        bw.w_proj = std::move(w_proj);
        bw.w_fc1 = std::move(w_fc1);
        bw.b_fc1 = std::move(b_fc1);
        bw.w_fc2 = std::move(w_fc2);
        bw.head_channels.clear();
        for (const auto& ch : rb.head_channels)
            bw.head_channels.push_back(static_cast<int>(ch.size()));
    }

    model.validate();
    rep.params_after = count_params(model);
    return rep;
}

ModelWeights masked_equivalent(const ModelWeights& dense, const CompactionReport& rep) {
    dense.validate();
    require_dense_geometry(dense, "masked equivalent expects an uncompacted model");
    if (rep.blocks.size() != dense.blocks.size())
        throw DimensionError("report block count disagrees with the model");

    const std::size_t d = dense.cfg.d;
    ModelWeights out = dense;
    for (std::size_t l = 0; l < out.blocks.size(); ++l) {
        BlockWeights& bw = out.blocks[l];
        std::vector<std::uint8_t> keep_channel(d, 0);
        for (const auto& ch : rep.blocks[l].head_channels)
            for (std::size_t c : ch) {
                if (c >= d) throw IndexError("report channel index out of range");
                keep_channel[c] = 1;
            }
        std::vector<std::uint8_t> keep_hidden(dense.cfg.m, 0);
        for (std::size_t u : rep.blocks[l].hidden) {
            if (u >= dense.cfg.m) throw IndexError("report hidden index out of range");
            keep_hidden[u] = 1;
        }
        for (std::size_t c = 0; c < d; ++c) {
            if (keep_channel[c]) continue;
            for (std::size_t third = 0; third < 3; ++third) {
                for (std::size_t r = 0; r < d; ++r) bw.w_qkv.at(r, third * d + c) = 0.0;
                bw.b_qkv[third * d + c] = 0.0;
            }
            for (std::size_t j = 0; j < d; ++j) bw.w_proj.at(c, j) = 0.0;
        }
        for (std::size_t u = 0; u < dense.cfg.m; ++u) {
            if (keep_hidden[u]) continue;
            for (std::size_t i = 0; i < d; ++i) bw.w_fc1.at(i, u) = 0.0;
            bw.b_fc1[u] = 0.0;
            for (std::size_t j = 0; j < d; ++j) bw.w_fc2.at(u, j) = 0.0;
        }
    }
    return out;
}

std::vector<EpochStat> train_sgd(ModelWeights& model, const Dataset& train, const Dataset& val,
                                 std::size_t epochs, double eta, std::size_t batch_size,
                                 bool keep_best) {
    model.validate();
    train.validate();
    val.validate();
    if (!(eta > 0.0)) throw ConfigError("learning rate eta must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (val.size() == 0) throw ContractError("validation set is empty");

    std::vector<EpochStat> stats;
    double best_acc = keep_best ? accuracy(model, val.images, val.labels) : 0.0;
    ModelWeights best = model;
    for (std::size_t e = 0; e < epochs; ++e) {
        const double mean_loss =
            run_epoch(model, train, batch_size, e + 1,
                      [&](const std::vector<Tensor*>& ps, const std::vector<Tensor>& grads,
                          const std::vector<Tape::NodeId>& ids) {
                          for (std::size_t i = 0; i < ps.size(); ++i)
                              sgd_step(*ps[i], grads[static_cast<std::size_t>(ids[i])], eta);
                      });
        const double val_acc = val_accuracy(model, val, e + 1);
        stats.push_back({e + 1, mean_loss, val_acc});
        if (keep_best && val_acc > best_acc) {
            best_acc = val_acc;
            best = model;
        }
    }
    if (keep_best) model = best;
    return stats;
}

std::vector<EpochStat> finetune(ModelWeights& model, const Dataset& train, const Dataset& val,
                                std::size_t epochs, double eta, std::size_t batch_size) {
    return train_sgd(model, train, val, epochs, eta, batch_size, /*keep_best=*/true);
}

} // namespace gohsp
