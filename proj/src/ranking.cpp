#include "gohsp/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gohsp/errors.hpp"

namespace gohsp {

namespace {

double flat_dot(const Tensor& a, const Tensor& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data()[i] * b.data()[i];
    return acc;
}

void check_same_heads(const ImportanceScores& a, const ImportanceScores& b) {
    if (a.s.size() != b.s.size())
        throw DimensionError("score vectors have different head counts");
    if (a.s.empty()) throw DimensionError("empty score vector");
}

} // namespace

std::size_t HeadMask::kept_count() const {
    std::size_t n = 0;
    for (auto k : keep) n += k ? 1 : 0;
    return n;
}

TransitionMatrix build_transition_matrix(const HeadCapture& capture, std::size_t block) {
    if (block >= capture.head_sums.size())
        throw IndexError("capture has no block " + std::to_string(block));
    const auto& sums = capture.head_sums[block];
    const std::size_t H = sums.size();
    if (H == 0) throw DimensionError("capture block has zero heads");
    if (capture.samples == 0) throw ContractError("capture holds no samples");

    std::vector<double> norm(H);
    for (std::size_t h = 0; h < H; ++h) {
        ensure_finite(sums[h], "captured head output");
        norm[h] = std::sqrt(flat_dot(sums[h], sums[h]));
    }

    TransitionMatrix tm;
    tm.l = block;
    tm.P = Tensor({H, H});
    tm.degenerate.assign(H, 0);
    for (std::size_t h = 0; h < H; ++h)
        if (norm[h] == 0.0) tm.degenerate[h] = 1;

    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < H; ++j) {
            double sim;
            if (i == j) {
                sim = 1.0;
            } else if (tm.degenerate[i] || tm.degenerate[j]) {
                sim = 0.0;
            } else {
                if (sums[i].numel() != sums[j].numel())
                    throw DimensionError("head outputs of unequal size in one block");
                sim = std::abs(flat_dot(sums[i], sums[j]) / (norm[i] * norm[j]));
            }
            tm.P.at(i, j) = sim;
        }
    }
    // Column normalization: the unit diagonal bounds every column sum away
    // from zero.
    for (std::size_t j = 0; j < H; ++j) {
        double col = 0;
        for (std::size_t i = 0; i < H; ++i) col += tm.P.at(i, j);
        for (std::size_t i = 0; i < H; ++i) tm.P.at(i, j) /= col;
    }
    return tm;
}

PowerResult power_iteration(const TransitionMatrix& tm, const RankingConfig& cfg,
                            std::vector<double>* delta_trace) {
    const Tensor& P = tm.P;
    if (P.rows() != P.cols() || P.rows() == 0)
        throw DimensionError("transition matrix must be square and nonempty");
    if (cfg.eps <= 0) throw ConfigError("convergence tolerance must be positive");
    if (cfg.max_iters == 0) throw ConfigError("max_iters must be at least 1");
    const std::size_t H = P.rows();
    for (std::size_t j = 0; j < H; ++j) {
        double col = 0;
        for (std::size_t i = 0; i < H; ++i) {
            if (P.at(i, j) < 0) throw ContractError("negative transition entry");
            col += P.at(i, j);
        }
        if (std::abs(col - 1.0) > 1e-8)
            throw ContractError("transition matrix column not normalized");
    }
    if (delta_trace) delta_trace->clear();

    std::vector<double> s(H, 1.0 / static_cast<double>(H)), next(H);
    double delta = 0;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        for (std::size_t i = 0; i < H; ++i) {
            double acc = 0;
            for (std::size_t j = 0; j < H; ++j) acc += P.at(i, j) * s[j];
            next[i] = acc;
        }
        double total = std::accumulate(next.begin(), next.end(), 0.0);
        if (!(total > 0) || !std::isfinite(total))
            throw NumericError("power iteration produced a non-positive mass");
        for (double& v : next) v /= total;
        double sq = 0;
        for (std::size_t i = 0; i < H; ++i) sq += (next[i] - s[i]) * (next[i] - s[i]);
        delta = std::sqrt(sq);
        if (delta_trace) delta_trace->push_back(delta);
        s = next;
        if (delta <= cfg.eps) {
            PowerResult r;
            r.scores.l = tm.l;
            r.scores.s = std::move(s);
            r.scores.degenerate = tm.degenerate;
            r.iterations = it;
            r.delta = delta;
            return r;
        }
    }
    throw ConvergenceError("power iteration did not reach tolerance " +
                               std::to_string(cfg.eps) + " within " +
                               std::to_string(cfg.max_iters) + " iterations",
                           delta);
}

std::vector<std::size_t> rank_order(const ImportanceScores& scores) {
    const std::size_t H = scores.s.size();
    if (!scores.degenerate.empty() && scores.degenerate.size() != H)
        throw DimensionError("degeneracy flags disagree with score length");
    std::vector<std::size_t> order(H);
    std::iota(order.begin(), order.end(), 0);
    auto dead = [&](std::size_t h) {
        return !scores.degenerate.empty() && scores.degenerate[h];
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dead(a) != dead(b)) return !dead(a);
        return scores.s[a] > scores.s[b];
    });
    return order;
}

HeadMask build_head_mask(const ImportanceScores& scores, std::size_t kappa_h,
                         const VitConfig& cfg) {
    const std::size_t H = scores.s.size();
    if (H == 0) throw DimensionError("empty score vector");
    if (kappa_h < 1 || kappa_h > H)
        throw BudgetError("head budget " + std::to_string(kappa_h) +
                          " outside [1, " + std::to_string(H) + "]");
    cfg.validate();
    if (cfg.H != H)
        throw DimensionError("score vector has " + std::to_string(H) +
                             " heads but the config declares " + std::to_string(cfg.H));

    HeadMask mask;
    mask.l = scores.l;
    mask.keep.assign(H, 0);
    const auto order = rank_order(scores);
    for (std::size_t r = 0; r < kappa_h; ++r) mask.keep[order[r]] = 1;

    const std::size_t d = cfg.d, dh = cfg.head_dim();
    mask.m_qkv = Tensor({d, 3 * d});
    mask.m_proj = Tensor({d, d});
    for (std::size_t h = 0; h < H; ++h) {
        if (!mask.keep[h]) continue;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
            for (std::size_t third = 0; third < 3; ++third)
                for (std::size_t r = 0; r < d; ++r) mask.m_qkv.at(r, third * d + c) = 1.0;
            for (std::size_t j = 0; j < d; ++j) mask.m_proj.at(c, j) = 1.0;
        }
    }
    return mask;
}

double rank_stability(const ImportanceScores& a, const ImportanceScores& b) {
    check_same_heads(a, b);
    const std::size_t n = a.s.size();
    long long concordant = 0, discordant = 0, tied_a = 0, tied_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a.s[i] - a.s[j];
            const double db = b.s[i] - b.s[j];
            if (da == 0 && db == 0) {
                ++tied_a;
                ++tied_b;
            } else if (da == 0) {
                ++tied_a;
            } else if (db == 0) {
                ++tied_b;
            } else if ((da > 0) == (db > 0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const long long ua = n0 - tied_a, ub = n0 - tied_b;
    if (ua == 0 || ub == 0) {
        // No untied pair on one side: correlation is defined only by whether
        // the weak orderings coincide.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (((a.s[i] - a.s[j]) > 0) != ((b.s[i] - b.s[j]) > 0) ||
                    ((a.s[i] - a.s[j]) < 0) != ((b.s[i] - b.s[j]) < 0))
                    return 0.0;
        return 1.0;
    }
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(ua) * static_cast<double>(ub));
}

std::string ranking_record(const ImportanceScores& scores, const HeadMask& mask) {
    if (scores.s.size() != mask.keep.size())
        throw DimensionError("scores and mask disagree on head count");
    std::string out = "block " + std::to_string(scores.l) + " | scores";
    char buf[64];
    for (double v : scores.s) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out += buf;
    }
    out += " | keep";
    bool first = true;
    for (std::size_t h = 0; h < mask.keep.size(); ++h) {
        if (!mask.keep[h]) continue;
        out += first ? " " : ",";
        out += std::to_string(h);
        first = false;
    }
    return out;
}

} // namespace gohsp
