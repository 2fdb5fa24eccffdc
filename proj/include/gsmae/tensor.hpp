#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gsmae/errors.hpp"
#include "gsmae/rng.hpp"

namespace gsmae {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

struct TensorImpl;

// Dense row-major float64 tensor participating in reverse-mode
// differentiation. A Tensor is a cheap handle onto a shared node; ops build
// a backward graph whenever an input has requires_grad set. Values are
// immutable after construction except through mutable_data(), which is
// reserved for optimizer updates on leaf parameters.
//
// Elementwise binary ops broadcast numpy-style (shapes aligned right, a
// dimension must match, be 1, or be absent). matmul broadcasts a rank-2
// right operand over the left operand's leading batch dims.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    // i.i.d. N(0, stddev^2) entries.
    static Tensor randn(Shape shape, Rng& gen, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::int64_t ndim() const;
    std::int64_t dim(int axis) const; // negative axes allowed
    std::int64_t numel() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data(); // leaf parameters only
    double value() const;                // scalar tensors
    double at(std::initializer_list<std::int64_t> idx) const;

    bool requires_grad() const;
    const std::vector<double>& grad() const;
    std::vector<double>& mutable_grad();
    void zero_grad();

    // Reverse-mode sweep from a scalar root. Accumulates into .grad of every
    // reachable node with requires_grad.
    void backward();

    // Value copy detached from the graph.
    Tensor detach() const;

    std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // lazily allocated, same length as data
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void(TensorImpl&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    void ensure_grad();
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);

// ---- structure ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a, int axis0, int axis1);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t len);
Tensor index_select(const Tensor& a, int axis, const std::vector<std::int64_t>& indices);
// Per-batch row gather: a is (B, n, ...), indices is B lists of rows,
// all the same length m; result is (B, m, ...). Backward scatter-adds.
Tensor gather_rows(const Tensor& a, const std::vector<std::vector<std::int64_t>>& indices);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis, bool keepdim = false);
// Gradient routes to the argmax element; ties break to the lowest index.
Tensor max_over_axis(const Tensor& a, int axis, bool keepdim = false);
Tensor min_over_axis(const Tensor& a, int axis, bool keepdim = false);
Tensor softmax_over_axis(const Tensor& a, int axis);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return mul_scalar(a, 1.0 / s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

} // namespace gsmae
