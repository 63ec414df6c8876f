#ifndef GOHSP_TENSOR_HPP_
#define GOHSP_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace gohsp {

// Dense row-major tensor of 64-bit reals. Kernels reject non-finite inputs
// and use a fixed accumulation order, so results are bit-stable for a given
// seed and build.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    // 2-D accessors; dimension checks live in the kernels.
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Throws NumericError if any entry is NaN/Inf.
void ensure_finite(const Tensor& t, const char* what);
bool all_finite(const Tensor& t);

// --- kernels ---------------------------------------------------------------

// C[m x n] = A[m x k] * B[k x n]. Per-element accumulation is in ascending-k
// order, identical to the naive triple loop.
Tensor matmul(const Tensor& a, const Tensor& b);
// C[m x n] = A[m x k] * B[n x k]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C[m x n] = A[k x m]^T * B[k x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& a);

// Per-row standardization followed by the affine (gain, bias); eps > 0.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps);

// Exact-erf GELU: x * Phi(x).
Tensor gelu(const Tensor& a);
double gelu_scalar(double x);

// Mean negative log-softmax of the true class. Labels must lie in [0, C).
double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);
// Gradient of the above w.r.t. logits: (softmax - onehot) / B.
Tensor cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels);

// --- elementwise helpers ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
void axpy(Tensor& y, double alpha, const Tensor& x); // y += alpha * x
double frobenius_norm(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
// Copy of rows [r0, r1) of a 2-D tensor.
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);

} // namespace gohsp

#endif // GOHSP_TENSOR_HPP_
