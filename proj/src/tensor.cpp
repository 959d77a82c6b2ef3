#include "cangat/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "cangat/error.hpp"

namespace cangat {

struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad; // allocated on first use
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

namespace {

thread_local int g_nograd_depth = 0;

using CMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>;
using MMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            raise(Errc::NonFiniteValue, std::string(op) + " produced a non-finite value");
}

TensorNode& deref(const Tensor& t) {
    if (!t.defined()) raise(Errc::ShapeMismatch, "operation on an undefined tensor");
    return *t.node();
}

Tensor make_op(const char* op, std::size_t rows, std::size_t cols, std::vector<double> value,
               const std::vector<Tensor>& parents, std::function<void(TensorNode&)> fn) {
    check_finite(op, value);
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    if (g_nograd_depth == 0) {
        bool rg = false;
        for (const Tensor& p : parents) rg = rg || deref(p).requires_grad;
        if (rg) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (const Tensor& p : parents) n->parents.push_back(p.node());
            n->backward_fn = std::move(fn);
        }
    }
    return Tensor(std::move(n));
}

// How the second operand of a binary op lines up against the first.
enum class Bc { Same, Scalar, Row, Col };

Bc classify_broadcast(const char* op, const TensorNode& a, const TensorNode& b) {
    if (b.rows == a.rows && b.cols == a.cols) return Bc::Same;
    if (b.rows == 1 && b.cols == 1) return Bc::Scalar;
    if (b.rows == 1 && b.cols == a.cols) return Bc::Row;
    if (b.cols == 1 && b.rows == a.rows) return Bc::Col;
    raise(Errc::ShapeMismatch, std::string(op) + ": cannot broadcast " + std::to_string(b.rows) +
                                   "x" + std::to_string(b.cols) + " against " +
                                   std::to_string(a.rows) + "x" + std::to_string(a.cols));
}

inline std::size_t bcast_index(Bc bc, std::size_t i, std::size_t j, std::size_t cols) {
    switch (bc) {
        case Bc::Same: return i * cols + j;
        case Bc::Scalar: return 0;
        case Bc::Row: return j;
        case Bc::Col: return i;
    }
    return 0;
}

// dfn fills (da, db) for one element given (a, b, upstream g).
using BinaryGrad = void (*)(double a, double b, double g, double& da, double& db);

Tensor ew_binary(const char* op, const Tensor& a, const Tensor& b, double (*fv)(double, double),
                 BinaryGrad dfn) {
    TensorNode& na = deref(a);
    TensorNode& nb = deref(b);
    const Bc bc = classify_broadcast(op, na, nb);
    const std::size_t R = na.rows, C = na.cols;
    std::vector<double> out(R * C);
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j)
            out[i * C + j] = fv(na.value[i * C + j], nb.value[bcast_index(bc, i, j, C)]);

    auto pa = a.node();
    auto pb = b.node();
    return make_op(op, R, C, std::move(out), {a, b}, [pa, pb, bc, dfn](TensorNode& self) {
        const std::size_t SR = self.rows, SC = self.cols;
        const bool ga = pa->requires_grad, gb = pb->requires_grad;
        if (ga) pa->ensure_grad();
        if (gb) pb->ensure_grad();
        for (std::size_t i = 0; i < SR; ++i)
            for (std::size_t j = 0; j < SC; ++j) {
                const std::size_t k = i * SC + j;
                const std::size_t bi = bcast_index(bc, i, j, SC);
                double da = 0.0, db = 0.0;
                dfn(pa->value[k], pb->value[bi], self.grad[k], da, db);
                if (ga) pa->grad[k] += da;
                if (gb) pb->grad[bi] += db;
            }
    });
}

// dfn gives da for one element given (a, y, upstream g).
using UnaryGrad = double (*)(double a, double y, double g);

Tensor ew_unary(const char* op, const Tensor& a, double (*fv)(double), UnaryGrad dfn) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fv(na.value[k]);
    auto pa = a.node();
    return make_op(op, na.rows, na.cols, std::move(out), {a}, [pa, dfn](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t k = 0; k < self.value.size(); ++k)
            pa->grad[k] += dfn(pa->value[k], self.value[k], self.grad[k]);
    });
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_1d(const double* x, double* y, std::size_t n, std::size_t stride) {
    double m = x[0];
    for (std::size_t k = 1; k < n; ++k) m = std::max(m, x[k * stride]);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        y[k * stride] = std::exp(x[k * stride] - m);
        s += y[k * stride];
    }
    for (std::size_t k = 0; k < n; ++k) y[k * stride] /= s;
}

void log_softmax_1d(const double* x, double* y, std::size_t n, std::size_t stride) {
    double m = x[0];
    for (std::size_t k = 1; k < n; ++k) m = std::max(m, x[k * stride]);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += std::exp(x[k * stride] - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < n; ++k) y[k * stride] = x[k * stride] - lse;
}

} // namespace

// --- handle methods ---------------------------------------------------------

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return from_data(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v, bool requires_grad) {
    return from_data(rows, cols, std::vector<double>(rows * cols, v), requires_grad);
}

Tensor Tensor::from_data(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad) {
    if (rows == 0 || cols == 0) raise(Errc::ShapeMismatch, "tensor dimensions must be positive");
    if (data.size() != rows * cols)
        raise(Errc::ShapeMismatch, "data length does not match shape");
    check_finite("from_data", data);
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(data);
    n->requires_grad = requires_grad && g_nograd_depth == 0;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data(1, 1, {v}, requires_grad);
}

std::size_t Tensor::rows() const { return deref(*this).rows; }
std::size_t Tensor::cols() const { return deref(*this).cols; }
std::size_t Tensor::numel() const { return deref(*this).value.size(); }
bool Tensor::requires_grad() const { return deref(*this).requires_grad; }

const std::vector<double>& Tensor::value() const { return deref(*this).value; }
std::vector<double>& Tensor::mutable_value() { return deref(*this).value; }

const std::vector<double>& Tensor::grad() const {
    TensorNode& n = deref(*this);
    n.ensure_grad();
    return n.grad;
}

std::vector<double>& Tensor::mutable_grad() {
    TensorNode& n = deref(*this);
    n.ensure_grad();
    return n.grad;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

double Tensor::item() const {
    TensorNode& n = deref(*this);
    if (n.value.size() != 1) raise(Errc::NonScalarLoss, "item() requires a 1x1 tensor");
    return n.value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    TensorNode& n = deref(*this);
    if (r >= n.rows || c >= n.cols) raise(Errc::ShapeMismatch, "at(): index out of range");
    return n.value[r * n.cols + c];
}

void Tensor::zero_grad() const {
    TensorNode& n = deref(*this);
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::backward() const {
    TensorNode& root = deref(*this);
    if (root.value.size() != 1)
        raise(Errc::NonScalarLoss, "backward() requires a 1x1 loss tensor");
    if (!root.requires_grad) return;

    // Reverse-topological order: a node's gradient is complete before its
    // backward_fn pushes it into the parents.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    visited.insert(&root);
    stack.emplace_back(&root, 0);
    while (!stack.empty()) {
        TensorNode* n = stack.back().first;
        std::size_t& next = stack.back().second;
        if (next < n->parents.size()) {
            TensorNode* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Interior gradients are scratch space for this pass and start at zero;
    // leaves (parameters, inputs) accumulate across passes until zero_grad.
    for (TensorNode* n : order) {
        n->ensure_grad();
        if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    root.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

NoGradGuard::NoGradGuard() { ++g_nograd_depth; }
NoGradGuard::~NoGradGuard() { --g_nograd_depth; }
bool NoGradGuard::active() { return g_nograd_depth > 0; }

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    TensorNode& na = deref(a);
    TensorNode& nb = deref(b);
    if (na.cols != nb.rows)
        raise(Errc::ShapeMismatch, "matmul: inner dimensions " + std::to_string(na.cols) +
                                       " and " + std::to_string(nb.rows) + " differ");
    const std::size_t R = na.rows, K = na.cols, C = nb.cols;
    std::vector<double> out(R * C);
    MMap(out.data(), R, C) = CMap(na.value.data(), R, K) * CMap(nb.value.data(), K, C);

    auto pa = a.node();
    auto pb = b.node();
    return make_op("matmul", R, C, std::move(out), {a, b}, [pa, pb](TensorNode& self) {
        const std::size_t SR = pa->rows, SK = pa->cols, SC = pb->cols;
        CMap g(self.grad.data(), SR, SC);
        if (pa->requires_grad) {
            pa->ensure_grad();
            MMap(pa->grad.data(), SR, SK) += g * CMap(pb->value.data(), SK, SC).transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            MMap(pb->grad.data(), SK, SC) += CMap(pa->value.data(), SR, SK).transpose() * g;
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return ew_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return ew_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ew_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return ew_binary(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = na.value[k] * c;
    auto pa = a.node();
    return make_op("scale", na.rows, na.cols, std::move(out), {a}, [pa, c](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t k = 0; k < self.grad.size(); ++k) pa->grad[k] += c * self.grad[k];
    });
}

Tensor add_const(const Tensor& a, double c) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = na.value[k] + c;
    auto pa = a.node();
    return make_op("add_const", na.rows, na.cols, std::move(out), {a}, [pa](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t k = 0; k < self.grad.size(); ++k) pa->grad[k] += self.grad[k];
    });
}

Tensor powc(const Tensor& a, double exponent) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::pow(na.value[k], exponent);
    auto pa = a.node();
    return make_op("powc", na.rows, na.cols, std::move(out), {a},
                   [pa, exponent](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (std::size_t k = 0; k < self.grad.size(); ++k) {
                           const double d = exponent == 0.0
                                                ? 0.0
                                                : exponent * std::pow(pa->value[k], exponent - 1.0);
                           pa->grad[k] += d * self.grad[k];
                       }
                   });
}

Tensor exp(const Tensor& a) {
    return ew_unary(
        "exp", a, [](double x) { return std::exp(x); },
        [](double, double y, double g) { return y * g; });
}

Tensor log(const Tensor& a) {
    return ew_unary(
        "log", a, [](double x) { return std::log(x); },
        [](double x, double, double g) { return g / x; });
}

Tensor sigmoid(const Tensor& a) {
    return ew_unary(
        "sigmoid", a, [](double x) { return stable_sigmoid(x); },
        [](double, double y, double g) { return y * (1.0 - y) * g; });
}

Tensor tanh_act(const Tensor& a) {
    return ew_unary(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y, double g) { return (1.0 - y * y) * g; });
}

Tensor elu(const Tensor& a, double alpha) {
    if (alpha == 1.0)
        return ew_unary(
            "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
            [](double x, double y, double g) { return x > 0.0 ? g : (y + 1.0) * g; });
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = na.value[k] > 0.0 ? na.value[k] : alpha * std::expm1(na.value[k]);
    auto pa = a.node();
    return make_op("elu", na.rows, na.cols, std::move(out), {a}, [pa, alpha](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t k = 0; k < self.grad.size(); ++k) {
            const double d = pa->value[k] > 0.0 ? 1.0 : self.value[k] + alpha;
            pa->grad[k] += d * self.grad[k];
        }
    });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = na.value[k] > 0.0 ? na.value[k] : slope * na.value[k];
    auto pa = a.node();
    return make_op("leaky_relu", na.rows, na.cols, std::move(out), {a},
                   [pa, slope](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (std::size_t k = 0; k < self.grad.size(); ++k)
                           pa->grad[k] += (pa->value[k] > 0.0 ? 1.0 : slope) * self.grad[k];
                   });
}

// --- shape ops ----------------------------------------------------------------

Tensor transpose(const Tensor& a) {
    TensorNode& na = deref(a);
    const std::size_t R = na.rows, C = na.cols;
    std::vector<double> out(R * C);
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out[j * R + i] = na.value[i * C + j];
    auto pa = a.node();
    return make_op("transpose", C, R, std::move(out), {a}, [pa](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const std::size_t R2 = self.rows, C2 = self.cols; // R2 = cols(a), C2 = rows(a)
        for (std::size_t i = 0; i < R2; ++i)
            for (std::size_t j = 0; j < C2; ++j) pa->grad[j * R2 + i] += self.grad[i * C2 + j];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) raise(Errc::EmptyLayerList, "concat_cols with no inputs");
    const std::size_t R = deref(parts[0]).rows;
    std::size_t C = 0;
    for (const Tensor& p : parts) {
        if (deref(p).rows != R) raise(Errc::ShapeMismatch, "concat_cols: row counts differ");
        C += deref(p).cols;
    }
    std::vector<double> out(R * C);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        TensorNode& np = deref(p);
        for (std::size_t i = 0; i < R; ++i)
            std::copy(np.value.begin() + i * np.cols, np.value.begin() + (i + 1) * np.cols,
                      out.begin() + i * C + off);
        off += np.cols;
    }
    std::vector<std::shared_ptr<TensorNode>> pnodes;
    for (const Tensor& p : parts) pnodes.push_back(p.node());
    return make_op("concat_cols", R, C, std::move(out), parts, [pnodes](TensorNode& self) {
        std::size_t off2 = 0;
        for (const auto& pn : pnodes) {
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (std::size_t i = 0; i < pn->rows; ++i)
                    for (std::size_t j = 0; j < pn->cols; ++j)
                        pn->grad[i * pn->cols + j] += self.grad[i * self.cols + off2 + j];
            }
            off2 += pn->cols;
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) raise(Errc::EmptyLayerList, "concat_rows with no inputs");
    const std::size_t C = deref(parts[0]).cols;
    std::size_t R = 0;
    for (const Tensor& p : parts) {
        if (deref(p).cols != C) raise(Errc::ShapeMismatch, "concat_rows: column counts differ");
        R += deref(p).rows;
    }
    std::vector<double> out;
    out.reserve(R * C);
    for (const Tensor& p : parts)
        out.insert(out.end(), deref(p).value.begin(), deref(p).value.end());
    std::vector<std::shared_ptr<TensorNode>> pnodes;
    for (const Tensor& p : parts) pnodes.push_back(p.node());
    return make_op("concat_rows", R, C, std::move(out), parts, [pnodes](TensorNode& self) {
        std::size_t off = 0;
        for (const auto& pn : pnodes) {
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (std::size_t k = 0; k < pn->value.size(); ++k) pn->grad[k] += self.grad[off + k];
            }
            off += pn->value.size();
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
    TensorNode& na = deref(a);
    if (len == 0 || start + len > na.cols) raise(Errc::ShapeMismatch, "slice_cols out of range");
    const std::size_t R = na.rows;
    std::vector<double> out(R * len);
    for (std::size_t i = 0; i < R; ++i)
        std::copy(na.value.begin() + i * na.cols + start,
                  na.value.begin() + i * na.cols + start + len, out.begin() + i * len);
    auto pa = a.node();
    return make_op("slice_cols", R, len, std::move(out), {a}, [pa, start](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.rows; ++i)
            for (std::size_t j = 0; j < self.cols; ++j)
                pa->grad[i * pa->cols + start + j] += self.grad[i * self.cols + j];
    });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len) {
    TensorNode& na = deref(a);
    if (len == 0 || start + len > na.rows) raise(Errc::ShapeMismatch, "slice_rows out of range");
    const std::size_t C = na.cols;
    std::vector<double> out(na.value.begin() + start * C, na.value.begin() + (start + len) * C);
    auto pa = a.node();
    return make_op("slice_rows", len, C, std::move(out), {a}, [pa, start](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const std::size_t base = start * self.cols;
        for (std::size_t k = 0; k < self.value.size(); ++k) pa->grad[base + k] += self.grad[k];
    });
}

// --- reductions -----------------------------------------------------------------

Tensor reduce_sum(const Tensor& a) {
    TensorNode& na = deref(a);
    double s = 0.0;
    for (double v : na.value) s += v;
    auto pa = a.node();
    return make_op("reduce_sum", 1, 1, {s}, {a}, [pa](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0];
        for (double& d : pa->grad) d += g;
    });
}

Tensor reduce_mean(const Tensor& a) {
    TensorNode& na = deref(a);
    double s = 0.0;
    for (double v : na.value) s += v;
    const double inv = 1.0 / double(na.value.size());
    auto pa = a.node();
    return make_op("reduce_mean", 1, 1, {s * inv}, {a}, [pa, inv](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0] * inv;
        for (double& d : pa->grad) d += g;
    });
}

Tensor row_sum(const Tensor& a) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.rows, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j) out[i] += na.value[i * na.cols + j];
    auto pa = a.node();
    return make_op("row_sum", na.rows, 1, std::move(out), {a}, [pa](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < pa->rows; ++i)
            for (std::size_t j = 0; j < pa->cols; ++j)
                pa->grad[i * pa->cols + j] += self.grad[i];
    });
}

Tensor col_mean(const Tensor& a) {
    TensorNode& na = deref(a);
    std::vector<double> out(na.cols, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j) out[j] += na.value[i * na.cols + j];
    const double inv = 1.0 / double(na.rows);
    for (double& v : out) v *= inv;
    auto pa = a.node();
    return make_op("col_mean", 1, na.cols, std::move(out), {a}, [pa, inv](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < pa->rows; ++i)
            for (std::size_t j = 0; j < pa->cols; ++j)
                pa->grad[i * pa->cols + j] += self.grad[j] * inv;
    });
}

// --- normalization -----------------------------------------------------------

Tensor softmax(const Tensor& a, int axis) {
    TensorNode& na = deref(a);
    if (axis != 0 && axis != 1) raise(Errc::InvalidAxis, "softmax axis must be 0 or 1");
    const std::size_t R = na.rows, C = na.cols;
    std::vector<double> out(R * C);
    if (axis == 1)
        for (std::size_t i = 0; i < R; ++i) softmax_1d(&na.value[i * C], &out[i * C], C, 1);
    else
        for (std::size_t j = 0; j < C; ++j) softmax_1d(&na.value[j], &out[j], R, C);

    auto pa = a.node();
    return make_op("softmax", R, C, std::move(out), {a}, [pa, axis](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const std::size_t SR = self.rows, SC = self.cols;
        const std::size_t lanes = axis == 1 ? SR : SC;
        const std::size_t n = axis == 1 ? SC : SR;
        const std::size_t stride = axis == 1 ? 1 : SC;
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            const std::size_t base = axis == 1 ? lane * SC : lane;
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                dot += self.grad[base + k * stride] * self.value[base + k * stride];
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t idx = base + k * stride;
                pa->grad[idx] += self.value[idx] * (self.grad[idx] - dot);
            }
        }
    });
}

Tensor log_softmax(const Tensor& a, int axis) {
    TensorNode& na = deref(a);
    if (axis != 0 && axis != 1) raise(Errc::InvalidAxis, "log_softmax axis must be 0 or 1");
    const std::size_t R = na.rows, C = na.cols;
    std::vector<double> out(R * C);
    if (axis == 1)
        for (std::size_t i = 0; i < R; ++i) log_softmax_1d(&na.value[i * C], &out[i * C], C, 1);
    else
        for (std::size_t j = 0; j < C; ++j) log_softmax_1d(&na.value[j], &out[j], R, C);

    auto pa = a.node();
    return make_op("log_softmax", R, C, std::move(out), {a}, [pa, axis](TensorNode& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const std::size_t SR = self.rows, SC = self.cols;
        const std::size_t lanes = axis == 1 ? SR : SC;
        const std::size_t n = axis == 1 ? SC : SR;
        const std::size_t stride = axis == 1 ? 1 : SC;
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            const std::size_t base = axis == 1 ? lane * SC : lane;
            double gsum = 0.0;
            for (std::size_t k = 0; k < n; ++k) gsum += self.grad[base + k * stride];
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t idx = base + k * stride;
                pa->grad[idx] += self.grad[idx] - std::exp(self.value[idx]) * gsum;
            }
        }
    });
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        raise(Errc::ProbabilityOutOfRange, "dropout rate must be in [0, 1)");
    if (!training || rate == 0.0) return a; // exact identity, same node
    TensorNode& na = deref(a);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(na.value.size());
    for (double& m : mask) m = rng.uniform01() >= rate ? keep_scale : 0.0;
    std::vector<double> out(na.value.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = na.value[k] * mask[k];
    auto pa = a.node();
    return make_op("dropout", na.rows, na.cols, std::move(out), {a},
                   [pa, mask = std::move(mask)](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (std::size_t k = 0; k < self.grad.size(); ++k)
                           pa->grad[k] += mask[k] * self.grad[k];
                   });
}

// --- indexed ops ---------------------------------------------------------------

Tensor gather_rows(const Tensor& a, std::vector<std::uint32_t> idx) {
    TensorNode& na = deref(a);
    if (idx.empty()) raise(Errc::ShapeMismatch, "gather_rows with no indices");
    const std::size_t C = na.cols;
    std::vector<double> out(idx.size() * C);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= na.rows) raise(Errc::EdgeIndexOutOfRange, "gather_rows index out of range");
        std::copy(na.value.begin() + idx[k] * C, na.value.begin() + (idx[k] + 1) * C,
                  out.begin() + k * C);
    }
    auto pa = a.node();
    // Row count must be read before the capture below moves idx away:
    // argument evaluation order is unspecified.
    const std::size_t R = idx.size();
    return make_op("gather_rows", R, C, std::move(out), {a},
                   [pa, idx = std::move(idx)](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       const std::size_t SC = self.cols;
                       for (std::size_t k = 0; k < idx.size(); ++k)
                           for (std::size_t j = 0; j < SC; ++j)
                               pa->grad[idx[k] * SC + j] += self.grad[k * SC + j];
                   });
}

Tensor segment_sum(const Tensor& a, std::vector<std::uint32_t> seg, std::size_t num_segments) {
    TensorNode& na = deref(a);
    if (seg.size() != na.rows) raise(Errc::ShapeMismatch, "segment_sum: one id per row required");
    if (num_segments == 0) raise(Errc::ShapeMismatch, "segment_sum: need at least one segment");
    const std::size_t C = na.cols;
    std::vector<double> out(num_segments * C, 0.0);
    for (std::size_t k = 0; k < seg.size(); ++k) {
        if (seg[k] >= num_segments)
            raise(Errc::EdgeIndexOutOfRange, "segment id exceeds segment count");
        for (std::size_t j = 0; j < C; ++j) out[seg[k] * C + j] += na.value[k * C + j];
    }
    auto pa = a.node();
    return make_op("segment_sum", num_segments, C, std::move(out), {a},
                   [pa, seg = std::move(seg)](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       const std::size_t SC = self.cols;
                       for (std::size_t k = 0; k < seg.size(); ++k)
                           for (std::size_t j = 0; j < SC; ++j)
                               pa->grad[k * SC + j] += self.grad[seg[k] * SC + j];
                   });
}

Tensor segment_mean(const Tensor& a, std::vector<std::uint32_t> seg, std::size_t num_segments) {
    TensorNode& na = deref(a);
    if (seg.size() != na.rows) raise(Errc::ShapeMismatch, "segment_mean: one id per row required");
    if (num_segments == 0) raise(Errc::ShapeMismatch, "segment_mean: need at least one segment");
    std::vector<double> inv_count(num_segments, 0.0);
    for (std::uint32_t s : seg) {
        if (s >= num_segments) raise(Errc::EdgeIndexOutOfRange, "segment id exceeds segment count");
        inv_count[s] += 1.0;
    }
    for (double& c : inv_count) c = c > 0.0 ? 1.0 / c : 0.0;

    const std::size_t C = na.cols;
    std::vector<double> out(num_segments * C, 0.0);
    for (std::size_t k = 0; k < seg.size(); ++k)
        for (std::size_t j = 0; j < C; ++j)
            out[seg[k] * C + j] += na.value[k * C + j] * inv_count[seg[k]];

    auto pa = a.node();
    return make_op("segment_mean", num_segments, C, std::move(out), {a},
                   [pa, seg = std::move(seg), inv_count = std::move(inv_count)](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       const std::size_t SC = self.cols;
                       for (std::size_t k = 0; k < seg.size(); ++k)
                           for (std::size_t j = 0; j < SC; ++j)
                               pa->grad[k * SC + j] +=
                                   self.grad[seg[k] * SC + j] * inv_count[seg[k]];
                   });
}

Tensor segment_softmax(const Tensor& scores, std::vector<std::uint32_t> seg,
                       std::size_t num_segments) {
    TensorNode& ns = deref(scores);
    if (ns.cols != 1) raise(Errc::ShapeMismatch, "segment_softmax expects an Mx1 score column");
    if (seg.size() != ns.rows)
        raise(Errc::ShapeMismatch, "segment_softmax: one id per score required");

    // Two passes: per-segment max (stability), then exp/normalize.
    std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < seg.size(); ++k) {
        if (seg[k] >= num_segments)
            raise(Errc::EdgeIndexOutOfRange, "segment id exceeds segment count");
        seg_max[seg[k]] = std::max(seg_max[seg[k]], ns.value[k]);
    }
    std::vector<double> out(ns.rows);
    std::vector<double> seg_sum(num_segments, 0.0);
    for (std::size_t k = 0; k < seg.size(); ++k) {
        out[k] = std::exp(ns.value[k] - seg_max[seg[k]]);
        seg_sum[seg[k]] += out[k];
    }
    for (std::size_t k = 0; k < seg.size(); ++k) out[k] /= seg_sum[seg[k]];

    auto pa = scores.node();
    return make_op("segment_softmax", ns.rows, 1, std::move(out), {scores},
                   [pa, seg = std::move(seg), num_segments](TensorNode& self) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       std::vector<double> dot(num_segments, 0.0);
                       for (std::size_t k = 0; k < seg.size(); ++k)
                           dot[seg[k]] += self.grad[k] * self.value[k];
                       for (std::size_t k = 0; k < seg.size(); ++k)
                           pa->grad[k] += self.value[k] * (self.grad[k] - dot[seg[k]]);
                   });
}

Tensor detach(const Tensor& a) {
    TensorNode& na = deref(a);
    return Tensor::from_data(na.rows, na.cols, na.value, false);
}

// --- gradient checking ------------------------------------------------------------

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
    NoGradGuard guard;
    Tensor out = f();
    return out.item();
}

double fd_versus_analytic(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                          double eps) {
    for (const Tensor& p : params) {
        if (!p.requires_grad())
            raise(Errc::ShapeMismatch, "grad_check parameter does not require gradients");
        p.zero_grad();
    }
    Tensor loss = f();
    if (loss.numel() != 1) raise(Errc::NonScalarLoss, "grad_check function must return a scalar");
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) analytic.push_back(p.grad());

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        std::vector<double>& v = p.mutable_value();
        for (std::size_t k = 0; k < v.size(); ++k) {
            const double orig = v[k];
            v[k] = orig + eps;
            const double lp = eval_scalar(f);
            v[k] = orig - eps;
            const double lm = eval_scalar(f);
            v[k] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double ga = analytic[pi][k];
            const double rel =
                std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    return fd_versus_analytic([&]() { return f(x); }, {x}, eps);
}

double grad_check_params(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps) {
    return fd_versus_analytic(f, params, eps);
}

} // namespace cangat
