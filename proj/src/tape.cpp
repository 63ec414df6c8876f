#include "gohsp/tape.hpp"

#include <cmath>
#include <utility>

#include "gohsp/errors.hpp"

namespace gohsp {
namespace {

// Sum of head channel widths; validates the per-head layout.
std::size_t total_channels(const std::vector<int>& head_channels) {
    std::size_t c = 0;
    for (int w : head_channels) {
        if (w < 0) throw ContractError("head channel width must be >= 0");
        c += static_cast<std::size_t>(w);
    }
    return c;
}

} // namespace

Tape::NodeId Tape::push_value(Tensor v) {
    values_.push_back(std::move(v));
    return static_cast<NodeId>(values_.size() - 1);
}

Tape::NodeId Tape::input(Tensor value) {
    ensure_finite(value, "tape input");
    return push_value(std::move(value));
}

Tensor& Tape::grad_slot(std::vector<Tensor>& grads, std::vector<bool>& live, NodeId id) {
    auto i = static_cast<std::size_t>(id);
    if (!live[i]) {
        grads[i] = Tensor(values_[i].shape());
        live[i] = true;
    }
    return grads[i];
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    NodeId out = push_value(gohsp::matmul(value(a), value(b)));
    ops_.push_back({out, [a, b, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        axpy(t.grad_slot(g, live, a), 1.0, matmul_nt(go, t.value(b)));
                        axpy(t.grad_slot(g, live, b), 1.0, matmul_tn(t.value(a), go));
                    }});
    return out;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    NodeId out = push_value(gohsp::add(value(a), value(b)));
    ops_.push_back({out, [a, b, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        axpy(t.grad_slot(g, live, a), 1.0, go);
                        axpy(t.grad_slot(g, live, b), 1.0, go);
                    }});
    return out;
}

Tape::NodeId Tape::add_bias(NodeId x, NodeId bias) {
    const Tensor& xv = value(x);
    const Tensor& bv = value(bias);
    if (bv.numel() != xv.cols()) {
        throw DimensionError("add_bias: bias length " + std::to_string(bv.numel()) +
                             " != cols " + std::to_string(xv.cols()));
    }
    Tensor out_v(xv.shape());
    const std::size_t m = xv.rows(), n = xv.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out_v.data()[i * n + j] = xv.data()[i * n + j] + bv.data()[j];
    NodeId out = push_value(std::move(out_v));
    ops_.push_back({out, [x, bias, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        axpy(t.grad_slot(g, live, x), 1.0, go);
                        Tensor& gb = t.grad_slot(g, live, bias);
                        const std::size_t m = go.rows(), n = go.cols();
                        for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < n; ++j) gb.data()[j] += go.data()[i * n + j];
                    }});
    return out;
}

Tape::NodeId Tape::scale(NodeId x, double c) {
    NodeId out = push_value(gohsp::scale(value(x), c));
    ops_.push_back({out, [x, c, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        axpy(t.grad_slot(g, live, x), c, g[static_cast<std::size_t>(out)]);
                    }});
    return out;
}

Tape::NodeId Tape::gelu(NodeId x) {
    NodeId out = push_value(gohsp::gelu(value(x)));
    ops_.push_back({out, [x, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        const Tensor& xv = t.value(x);
                        Tensor& gx = t.grad_slot(g, live, x);
                        constexpr double inv_sqrt2 = 0.70710678118654752440;
                        constexpr double inv_sqrt2pi = 0.39894228040143267794;
                        for (std::size_t i = 0; i < xv.numel(); ++i) {
                            const double v = xv.data()[i];
                            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                            gx.data()[i] += go.data()[i] * (cdf + v * pdf);
                        }
                    }});
    return out;
}

Tape::NodeId Tape::softmax_rows(NodeId x) {
    NodeId out = push_value(gohsp::softmax_rows(value(x)));
    ops_.push_back({out, [x, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        const Tensor& y = t.value(out);
                        Tensor& gx = t.grad_slot(g, live, x);
                        const std::size_t m = y.rows(), n = y.cols();
                        for (std::size_t i = 0; i < m; ++i) {
                            double dotv = 0.0;
                            for (std::size_t j = 0; j < n; ++j)
                                dotv += go.data()[i * n + j] * y.data()[i * n + j];
                            for (std::size_t j = 0; j < n; ++j)
                                gx.data()[i * n + j] +=
                                    (go.data()[i * n + j] - dotv) * y.data()[i * n + j];
                        }
                    }});
    return out;
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
    // All reads of value(x) happen before push_value: appending may reallocate
    // the value store and invalidate references into it.
    const Tensor xv = value(x);
    Tensor out_v = gohsp::layer_norm(xv, value(gain), value(bias), eps);
    // Save the normalized activations and per-row inverse stddev for backward;
    // recovering them from the output would fail when gain has zeros.
    const std::size_t m = xv.rows(), n = xv.cols();
    Tensor xhat({m, n});
    Tensor inv_std({m});
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xv.data()[i * n + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xv.data()[i * n + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std.data()[i] = inv;
        for (std::size_t j = 0; j < n; ++j)
            xhat.data()[i * n + j] = (xv.data()[i * n + j] - mean) * inv;
    }
    NodeId out = push_value(std::move(out_v));
    ops_.push_back({out, [x, gain, bias, out, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)](Tape& t, std::vector<Tensor>& g,
                                                        std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        const Tensor& gv = t.value(gain);
                        Tensor& gx = t.grad_slot(g, live, x);
                        Tensor& gg = t.grad_slot(g, live, gain);
                        Tensor& gb = t.grad_slot(g, live, bias);
                        const std::size_t m = go.rows(), n = go.cols();
                        for (std::size_t i = 0; i < m; ++i) {
                            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                            for (std::size_t j = 0; j < n; ++j) {
                                const double d = go.data()[i * n + j];
                                const double xh = xhat.data()[i * n + j];
                                gg.data()[j] += d * xh;
                                gb.data()[j] += d;
                                const double dxh = d * gv.data()[j];
                                mean_dxhat += dxh;
                                mean_dxhat_xhat += dxh * xh;
                            }
                            mean_dxhat /= static_cast<double>(n);
                            mean_dxhat_xhat /= static_cast<double>(n);
                            const double inv = inv_std.data()[i];
                            for (std::size_t j = 0; j < n; ++j) {
                                const double dxh = go.data()[i * n + j] * gv.data()[j];
                                gx.data()[i * n + j] +=
                                    inv * (dxh - mean_dxhat -
                                           xhat.data()[i * n + j] * mean_dxhat_xhat);
                            }
                        }
                    }});
    return out;
}

Tape::NodeId Tape::cross_entropy(NodeId logits, std::vector<int> labels) {
    const Tensor& lv = value(logits);
    Tensor probs = gohsp::softmax_rows(lv);
    NodeId out = push_value(Tensor::scalar(gohsp::cross_entropy_loss(lv, labels)));
    ops_.push_back({out, [logits, out, probs = std::move(probs), labels = std::move(labels)](
                             Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const double go = g[static_cast<std::size_t>(out)].data()[0];
                        Tensor& gx = t.grad_slot(g, live, logits);
                        const std::size_t b = probs.rows(), c = probs.cols();
                        const double inv_b = 1.0 / static_cast<double>(b);
                        for (std::size_t i = 0; i < b; ++i) {
                            for (std::size_t j = 0; j < c; ++j) {
                                double p = probs.data()[i * c + j];
                                if (j == static_cast<std::size_t>(labels[i])) p -= 1.0;
                                gx.data()[i * c + j] += go * p * inv_b;
                            }
                        }
                    }});
    return out;
}

Tape::NodeId Tape::sum(NodeId x) {
    const Tensor& xv = value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv.data()[i];
    NodeId out = push_value(Tensor::scalar(s));
    ops_.push_back({out, [x, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const double go = g[static_cast<std::size_t>(out)].data()[0];
                        Tensor& gx = t.grad_slot(g, live, x);
                        for (std::size_t i = 0; i < gx.numel(); ++i) gx.data()[i] += go;
                    }});
    return out;
}

Tape::NodeId Tape::half_sq_norm(NodeId x) {
    const Tensor& xv = value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv.data()[i] * xv.data()[i];
    NodeId out = push_value(Tensor::scalar(0.5 * s));
    ops_.push_back({out, [x, out](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
                        const double go = g[static_cast<std::size_t>(out)].data()[0];
                        const Tensor& xv = t.value(x);
                        Tensor& gx = t.grad_slot(g, live, x);
                        for (std::size_t i = 0; i < xv.numel(); ++i)
                            gx.data()[i] += go * xv.data()[i];
                    }});
    return out;
}

Tape::NodeId Tape::extract_patches(NodeId images, std::size_t image_size, std::size_t patch_size,
                                   std::size_t channels) {
    const Tensor& img = value(images);
    if (patch_size == 0 || image_size % patch_size != 0)
        throw ContractError("extract_patches: patch size must divide image size");
    const std::size_t grid = image_size / patch_size;
    const std::size_t tokens = grid * grid;
    const std::size_t patch_dim = channels * patch_size * patch_size;
    if (img.cols() != channels * image_size * image_size)
        throw DimensionError("extract_patches: image row width mismatch");
    const std::size_t batch = img.rows();

    // Source offset within one image for every (token, patch element) pair.
    std::vector<std::size_t> src(tokens * patch_dim);
    for (std::size_t t = 0; t < tokens; ++t) {
        const std::size_t py = t / grid, px = t % grid;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t dy = 0; dy < patch_size; ++dy)
                for (std::size_t dx = 0; dx < patch_size; ++dx) {
                    const std::size_t e = c * patch_size * patch_size + dy * patch_size + dx;
                    src[t * patch_dim + e] = c * image_size * image_size +
                                             (py * patch_size + dy) * image_size +
                                             (px * patch_size + dx);
                }
    }
    Tensor out_v({batch * tokens, patch_dim});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = img.data() + b * img.cols();
        double* dst = out_v.data() + b * tokens * patch_dim;
        for (std::size_t i = 0; i < tokens * patch_dim; ++i) dst[i] = row[src[i]];
    }
    NodeId out = push_value(std::move(out_v));
    ops_.push_back(
        {out, [images, out, src = std::move(src), tokens, patch_dim](
                  Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
             const Tensor& go = g[static_cast<std::size_t>(out)];
             Tensor& gi = t.grad_slot(g, live, images);
             const std::size_t batch = gi.rows();
             for (std::size_t b = 0; b < batch; ++b) {
                 double* row = gi.data() + b * gi.cols();
                 const double* d = go.data() + b * tokens * patch_dim;
                 for (std::size_t i = 0; i < tokens * patch_dim; ++i) row[src[i]] += d[i];
             }
         }});
    return out;
}

Tape::NodeId Tape::prepend_cls(NodeId x, NodeId cls, std::size_t batch) {
    const Tensor& xv = value(x);
    const Tensor& cv = value(cls);
    const std::size_t d = xv.cols();
    if (cv.numel() != d) throw DimensionError("prepend_cls: cls width mismatch");
    if (batch == 0 || xv.rows() % batch != 0)
        throw DimensionError("prepend_cls: rows not divisible by batch");
    const std::size_t tokens = xv.rows() / batch;
    Tensor out_v({batch * (tokens + 1), d});
    for (std::size_t b = 0; b < batch; ++b) {
        double* dst = out_v.data() + b * (tokens + 1) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] = cv.data()[j];
        const double* srcp = xv.data() + b * tokens * d;
        for (std::size_t i = 0; i < tokens * d; ++i) dst[d + i] = srcp[i];
    }
    NodeId out = push_value(std::move(out_v));
    ops_.push_back({out, [x, cls, out, batch, tokens, d](Tape& t, std::vector<Tensor>& g,
                                                         std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        Tensor& gx = t.grad_slot(g, live, x);
                        Tensor& gc = t.grad_slot(g, live, cls);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* srcp = go.data() + b * (tokens + 1) * d;
                            for (std::size_t j = 0; j < d; ++j) gc.data()[j] += srcp[j];
                            double* dst = gx.data() + b * tokens * d;
                            for (std::size_t i = 0; i < tokens * d; ++i) dst[i] += srcp[d + i];
                        }
                    }});
    return out;
}

Tape::NodeId Tape::add_pos(NodeId x, NodeId pos, std::size_t batch) {
    const Tensor& xv = value(x);
    const Tensor& pv = value(pos);
    if (batch == 0 || xv.rows() % batch != 0)
        throw DimensionError("add_pos: rows not divisible by batch");
    const std::size_t tokens = xv.rows() / batch;
    if (pv.rows() != tokens || pv.cols() != xv.cols())
        throw DimensionError("add_pos: positional table shape mismatch");
    const std::size_t d = xv.cols();
    Tensor out_v(xv.shape());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < tokens * d; ++i)
            out_v.data()[b * tokens * d + i] = xv.data()[b * tokens * d + i] + pv.data()[i];
    NodeId out = push_value(std::move(out_v));
    ops_.push_back({out, [x, pos, out, batch, tokens, d](Tape& t, std::vector<Tensor>& g,
                                                         std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        Tensor& gx = t.grad_slot(g, live, x);
                        Tensor& gp = t.grad_slot(g, live, pos);
                        for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t i = 0; i < tokens * d; ++i) {
                                gx.data()[b * tokens * d + i] += go.data()[b * tokens * d + i];
                                gp.data()[i] += go.data()[b * tokens * d + i];
                            }
                    }});
    return out;
}

Tape::NodeId Tape::take_first_token(NodeId x, std::size_t batch, std::size_t tokens) {
    const Tensor& xv = value(x);
    if (xv.rows() != batch * tokens) throw DimensionError("take_first_token: row count mismatch");
    const std::size_t d = xv.cols();
    Tensor out_v({batch, d});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < d; ++j)
            out_v.data()[b * d + j] = xv.data()[b * tokens * d + j];
    NodeId out = push_value(std::move(out_v));
    ops_.push_back({out, [x, out, batch, tokens, d](Tape& t, std::vector<Tensor>& g,
                                                    std::vector<bool>& live) {
                        const Tensor& go = g[static_cast<std::size_t>(out)];
                        Tensor& gx = t.grad_slot(g, live, x);
                        for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t j = 0; j < d; ++j)
                                gx.data()[b * tokens * d + j] += go.data()[b * d + j];
                    }});
    return out;
}

Tape::NodeId Tape::attention_probs(NodeId qkv, std::vector<int> head_channels,
                                   double inv_sqrt_dh, std::size_t batch, std::size_t tokens) {
    const Tensor& qv = value(qkv);
    const std::size_t ctot = total_channels(head_channels);
    if (qv.cols() != 3 * ctot) throw DimensionError("attention_probs: qkv width != 3 * channels");
    if (qv.rows() != batch * tokens) throw DimensionError("attention_probs: qkv rows mismatch");
    const std::size_t heads = head_channels.size();
    const std::size_t w = qv.cols();

    Tensor out_v({batch * heads * tokens, tokens});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* base = qv.data() + b * tokens * w;
        std::size_t off = 0;
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t ch = static_cast<std::size_t>(head_channels[h]);
            double* pb = out_v.data() + ((b * heads + h) * tokens) * tokens;
            for (std::size_t i = 0; i < tokens; ++i) {
                const double* qi = base + i * w + off;
                for (std::size_t j = 0; j < tokens; ++j) {
                    const double* kj = base + j * w + ctot + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < ch; ++c) s += qi[c] * kj[c];
                    pb[i * tokens + j] = s * inv_sqrt_dh;
                }
            }
            off += ch;
        }
    }
    // Softmax the score rows in place (max-subtracted, as the kernel does).
    {
        Tensor sm = gohsp::softmax_rows(out_v);
        out_v = std::move(sm);
    }
    NodeId out = push_value(std::move(out_v));
    ops_.push_back(
        {out, [qkv, out, head_channels = std::move(head_channels), inv_sqrt_dh, batch, tokens,
               ctot](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
             const Tensor& go = g[static_cast<std::size_t>(out)];
             const Tensor& probs = t.value(out);
             const Tensor& qv = t.value(qkv);
             Tensor& gq = t.grad_slot(g, live, qkv);
             const std::size_t heads = head_channels.size();
             const std::size_t w = qv.cols();
             std::vector<double> ds(tokens); // one score row's gradient
             for (std::size_t b = 0; b < batch; ++b) {
                 const double* base = qv.data() + b * tokens * w;
                 double* gbase = gq.data() + b * tokens * w;
                 std::size_t off = 0;
                 for (std::size_t h = 0; h < heads; ++h) {
                     const std::size_t ch = static_cast<std::size_t>(head_channels[h]);
                     const std::size_t blk = ((b * heads + h) * tokens) * tokens;
                     for (std::size_t i = 0; i < tokens; ++i) {
                         const double* p = probs.data() + blk + i * tokens;
                         const double* dp = go.data() + blk + i * tokens;
                         double dotv = 0.0;
                         for (std::size_t j = 0; j < tokens; ++j) dotv += dp[j] * p[j];
                         for (std::size_t j = 0; j < tokens; ++j)
                             ds[j] = (dp[j] - dotv) * p[j] * inv_sqrt_dh;
                         // dQ_i += ds . K, dK_j += ds_j * Q_i
                         const double* qi = base + i * w + off;
                         double* gqi = gbase + i * w + off;
                         for (std::size_t j = 0; j < tokens; ++j) {
                             const double dsj = ds[j];
                             if (dsj == 0.0) continue;
                             const double* kj = base + j * w + ctot + off;
                             double* gkj = gbase + j * w + ctot + off;
                             for (std::size_t c = 0; c < ch; ++c) {
                                 gqi[c] += dsj * kj[c];
                                 gkj[c] += dsj * qi[c];
                             }
                         }
                     }
                     off += ch;
                 }
             }
         }});
    return out;
}

Tape::NodeId Tape::attention_output(NodeId probs, NodeId qkv, std::vector<int> head_channels,
                                    std::size_t batch, std::size_t tokens) {
    const Tensor& pv = value(probs);
    const Tensor& qv = value(qkv);
    const std::size_t ctot = total_channels(head_channels);
    const std::size_t heads = head_channels.size();
    if (qv.cols() != 3 * ctot) throw DimensionError("attention_output: qkv width != 3 * channels");
    if (pv.rows() != batch * heads * tokens || pv.cols() != tokens)
        throw DimensionError("attention_output: probs shape mismatch");
    const std::size_t w = qv.cols();

    Tensor out_v({batch * tokens, ctot});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* base = qv.data() + b * tokens * w;
        double* obase = out_v.data() + b * tokens * ctot;
        std::size_t off = 0;
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t ch = static_cast<std::size_t>(head_channels[h]);
            const std::size_t blk = ((b * heads + h) * tokens) * tokens;
            for (std::size_t i = 0; i < tokens; ++i) {
                const double* p = pv.data() + blk + i * tokens;
                double* oi = obase + i * ctot + off;
                for (std::size_t j = 0; j < tokens; ++j) {
                    const double pj = p[j];
                    const double* vj = base + j * w + 2 * ctot + off;
                    for (std::size_t c = 0; c < ch; ++c) oi[c] += pj * vj[c];
                }
            }
            off += ch;
        }
    }
    NodeId out = push_value(std::move(out_v));
    ops_.push_back(
        {out, [probs, qkv, out, head_channels = std::move(head_channels), batch, tokens,
               ctot](Tape& t, std::vector<Tensor>& g, std::vector<bool>& live) {
             const Tensor& go = g[static_cast<std::size_t>(out)];
             const Tensor& pv = t.value(probs);
             const Tensor& qv = t.value(qkv);
             Tensor& gp = t.grad_slot(g, live, probs);
             Tensor& gq = t.grad_slot(g, live, qkv);
             const std::size_t heads = head_channels.size();
             const std::size_t w = qv.cols();
             for (std::size_t b = 0; b < batch; ++b) {
                 const double* base = qv.data() + b * tokens * w;
                 double* gbase = gq.data() + b * tokens * w;
                 std::size_t off = 0;
                 for (std::size_t h = 0; h < heads; ++h) {
                     const std::size_t ch = static_cast<std::size_t>(head_channels[h]);
                     const std::size_t blk = ((b * heads + h) * tokens) * tokens;
                     for (std::size_t i = 0; i < tokens; ++i) {
                         const double* doi = go.data() + (b * tokens + i) * ctot + off;
                         const double* p = pv.data() + blk + i * tokens;
                         double* gpi = gp.data() + blk + i * tokens;
                         for (std::size_t j = 0; j < tokens; ++j) {
                             const double* vj = base + j * w + 2 * ctot + off;
                             double* gvj = gbase + j * w + 2 * ctot + off;
                             double acc = 0.0;
                             const double pj = p[j];
                             for (std::size_t c = 0; c < ch; ++c) {
                                 acc += doi[c] * vj[c];
                                 gvj[c] += pj * doi[c];
                             }
                             gpi[j] += acc;
                         }
                     }
                     off += ch;
                 }
             }
         }});
    return out;
}

std::vector<Tensor> Tape::backward(NodeId root) {
    if (root < 0 || static_cast<std::size_t>(root) >= values_.size())
        throw IndexError("backward: root id out of range");
    if (values_[static_cast<std::size_t>(root)].numel() != 1)
        throw ContractError("backward: root must be a scalar node");
    std::vector<Tensor> grads(values_.size());
    std::vector<bool> live(values_.size(), false);
    grads[static_cast<std::size_t>(root)] = Tensor::scalar(1.0);
    live[static_cast<std::size_t>(root)] = true;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if (!live[static_cast<std::size_t>(it->out)]) continue; // branch not on the path to root
        it->back(*this, grads, live);
    }
    // Nodes never touched still need zero tensors of the right shape.
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!live[i]) grads[i] = Tensor(values_[i].shape());
    return grads;
}

} // namespace gohsp
