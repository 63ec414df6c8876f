#include "gohsp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gohsp/errors.hpp"

namespace gohsp {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_2d(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + ": expected rank-2 tensor, got " + t.shape_str());
    }
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("tensor: shape " + shape_str() + " does not match data length " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

bool all_finite(const Tensor& t) {
    for (double v : t.vec()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void ensure_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) {
        throw NumericError(std::string(what) + ": non-finite entry");
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " * " + b.shape_str());
    }
    ensure_finite(a, "matmul lhs");
    ensure_finite(b, "matmul rhs");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    // i-k-j order: contiguous inner loop, ascending-k accumulation per element.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = pc + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + a.shape_str() + " * " +
                             b.shape_str() + "^T");
    }
    ensure_finite(a, "matmul_nt lhs");
    ensure_finite(b, "matmul_nt rhs");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] = acc;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_tn lhs");
    check_2d(b, "matmul_tn rhs");
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: inner dimensions disagree, " + a.shape_str() + "^T * " +
                             b.shape_str());
    }
    ensure_finite(a, "matmul_tn lhs");
    ensure_finite(b, "matmul_tn rhs");
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    Tensor c({m, n});
    // k outer keeps both reads contiguous; per-element accumulation stays ascending-k.
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a.data() + kk * m;
        const double* brow = b.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor softmax_rows(const Tensor& a) {
    check_2d(a, "softmax_rows");
    ensure_finite(a, "softmax_rows");
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = a.data() + i * n;
        double* y = out.data() + i * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
    }
    return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    check_2d(a, "layer_norm");
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be > 0");
    const std::size_t m = a.rows(), n = a.cols();
    if (gain.numel() != n || bias.numel() != n) {
        throw DimensionError("layer_norm: gain/bias length must equal row width " + std::to_string(n));
    }
    ensure_finite(a, "layer_norm input");
    ensure_finite(gain, "layer_norm gain");
    ensure_finite(bias, "layer_norm bias");
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = a.data() + i * n;
        double* y = out.data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = (x[j] - mean) * inv * gain[j] + bias[j];
        }
    }
    return out;
}

double gelu_scalar(double x) {
    return x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
}

Tensor gelu(const Tensor& a) {
    ensure_finite(a, "gelu");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = gelu_scalar(a[i]);
    return out;
}

double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
    check_2d(logits, "cross_entropy_loss");
    ensure_finite(logits, "cross_entropy_loss");
    const std::size_t b = logits.rows(), c = logits.cols();
    if (labels.size() != b) {
        throw DimensionError("cross_entropy_loss: batch size " + std::to_string(b) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const int lbl = labels[i];
        if (lbl < 0 || static_cast<std::size_t>(lbl) >= c) {
            throw IndexError("cross_entropy_loss: label " + std::to_string(lbl) + " outside [0, " +
                             std::to_string(c) + ")");
        }
        const double* x = logits.data() + i * c;
        double mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(x[j] - mx);
        total += (std::log(sum) + mx) - x[lbl];
    }
    return total / static_cast<double>(b);
}

Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t b = logits.rows(), c = logits.cols();
    Tensor g = softmax_rows(logits);
    const double inv = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        g.at(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        for (std::size_t j = 0; j < c; ++j) g.at(i, j) *= inv;
    }
    return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("hadamard: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * c;
    return out;
}

void axpy(Tensor& y, double alpha, const Tensor& x) {
    if (!y.same_shape(x)) throw DimensionError("axpy: shape mismatch");
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += alpha * x[i];
}

double frobenius_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.vec()) s += v * v;
    return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    if (r0 > r1 || r1 > a.rows()) throw IndexError("slice_rows: bad row range");
    Tensor out({r1 - r0, a.cols()});
    std::copy(a.data() + r0 * a.cols(), a.data() + r1 * a.cols(), out.data());
    return out;
}

} // namespace gohsp
