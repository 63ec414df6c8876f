#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gohsp/tensor.hpp"
#include "gohsp/vit.hpp"

namespace gohsp {

// Column-stochastic inter-head similarity matrix for one block, built from
// absolute cosine similarities of batch-summed head outputs. `degenerate[h]`
// marks heads whose captured output had zero norm (dead heads).
struct TransitionMatrix {
    std::size_t l = 0;
    Tensor P; // H x H, entries >= 0, every column sums to 1
    std::vector<std::uint8_t> degenerate;
};

// Per-head importance for one block: nonnegative, sums to 1. Degeneracy flags
// travel with the scores so mask construction can demote dead heads.
struct ImportanceScores {
    std::size_t l = 0;
    std::vector<double> s;
    std::vector<std::uint8_t> degenerate;
};

// Keep/remove decision for one block's heads, with the decision expanded to
// entry level over the dense attention weights: m_qkv is d x 3d (a column is 1
// iff its head is kept), m_proj is d x d (a row is 1 iff its head is kept).
struct HeadMask {
    std::size_t l = 0;
    std::vector<std::uint8_t> keep;
    Tensor m_qkv;
    Tensor m_proj;

    std::size_t kept_count() const;
};

struct RankingConfig {
    std::size_t batch = 64;       // samples to capture before ranking
    double eps = 1e-10;           // convergence tolerance on ||s' - s||_2
    std::size_t max_iters = 10000;
};

struct PowerResult {
    ImportanceScores scores;
    std::size_t iterations = 0;
    double delta = 0.0; // ||s' - s||_2 at the accepted step
};

// P(i,j) = |cos(flat(sum_b A_i), flat(sum_b A_j))|, diagonal 1, then each
// column normalized to sum 1. A zero-norm head gets similarity 0 to every
// other head and 1 to itself, and is flagged degenerate.
TransitionMatrix build_transition_matrix(const HeadCapture& capture, std::size_t block);

// Stationary distribution by power iteration from the uniform vector,
// renormalizing each step. Stops once ||s' - s||_2 <= cfg.eps; throws
// ConvergenceError (carrying the final delta) if max_iters is exhausted.
// `delta_trace`, when given, receives the per-iteration deltas.
PowerResult power_iteration(const TransitionMatrix& tm, const RankingConfig& cfg,
                            std::vector<double>* delta_trace = nullptr);

// Head indices ordered most-important first: non-degenerate before degenerate,
// then by descending score, ties toward the lower index.
std::vector<std::size_t> rank_order(const ImportanceScores& scores);

// Keeps the kappa_h top-ranked heads (per rank_order). cfg supplies the dense
// geometry for the expanded entry masks. kappa_h outside [1, H] -> BudgetError.
HeadMask build_head_mask(const ImportanceScores& scores, std::size_t kappa_h,
                         const VitConfig& cfg);

// Kendall rank correlation between the orderings induced by two score
// vectors, tie-adjusted (tau-b). If either vector has no untied pair the
// result is 1.0 when both vectors induce the same weak ordering, else 0.0.
double rank_stability(const ImportanceScores& a, const ImportanceScores& b);

// One structured-text record: block index, full-precision scores, keep-set.
std::string ranking_record(const ImportanceScores& scores, const HeadMask& mask);

} // namespace gohsp
