#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cangat/rng.hpp"

namespace cangat {

// Minimal reverse-mode autodiff over dense row-major 2-D arrays of doubles.
// A Tensor is a cheap shared handle to a node in a dynamically built
// computation graph; calling backward() on a 1x1 result accumulates
// gradients into every reachable node that requires them.

struct TensorNode;

class Tensor {
public:
    Tensor() = default; // null handle

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double v, bool requires_grad = false);
    static Tensor from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t numel() const;
    bool requires_grad() const;

    const std::vector<double>& value() const;
    std::vector<double>& mutable_value(); // in-place edits (init, optimizer steps)
    const std::vector<double>& grad() const;
    std::vector<double>& mutable_grad(); // in-place edits (clipping)
    bool has_grad() const;

    double item() const; // 1x1 only
    double at(std::size_t r, std::size_t c) const;

    void zero_grad() const;
    void backward() const; // raises NonScalarLoss unless 1x1

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

// While a guard is alive, newly created tensors record no graph edges, so
// forward passes inside it are pure computation (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool active();
};

// --- elementwise and linear algebra ---------------------------------------
// Binary ops broadcast the second argument when it is 1x1, a 1xC row, or an
// Rx1 column against an RxC first argument.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor powc(const Tensor& a, double exponent);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);

// --- shape ops -------------------------------------------------------------
Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len);

// --- reductions ------------------------------------------------------------
Tensor reduce_sum(const Tensor& a);  // 1x1
Tensor reduce_mean(const Tensor& a); // 1x1
Tensor row_sum(const Tensor& a);     // Rx1, sums across columns
Tensor col_mean(const Tensor& a);    // 1xC, means down rows

// --- normalization and regularization ---------------------------------------
// axis 0: down each column; axis 1: across each row.
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);

// --- indexed ops (edge gather/scatter, per-graph pooling) -------------------
Tensor gather_rows(const Tensor& a, std::vector<std::uint32_t> idx);
Tensor segment_sum(const Tensor& a, std::vector<std::uint32_t> seg, std::size_t num_segments);
Tensor segment_mean(const Tensor& a, std::vector<std::uint32_t> seg, std::size_t num_segments);
// Softmax within each segment of an Mx1 score column (per-destination
// attention normalization).
Tensor segment_softmax(const Tensor& scores, std::vector<std::uint32_t> seg,
                       std::size_t num_segments);

// Same values, no history: gradients never flow past the result.
Tensor detach(const Tensor& a);

// --- verification ------------------------------------------------------------
// Max over elements of |g_autodiff - g_fd| / max(|g_autodiff|, |g_fd|, 1e-8),
// central differences with step eps.  f must map x to a 1x1 tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5);
// Multi-parameter variant: f() closes over `params` and rebuilds the loss.
double grad_check_params(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps = 1e-5);

} // namespace cangat
