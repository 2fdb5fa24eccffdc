#include "gsmae/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace gsmae {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ")";
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

void TensorImpl::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

namespace {

void check_shape(const Shape& s) {
    for (auto d : s)
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
}

Tensor wrap(Shape shape, std::vector<double> data) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

// Attaches graph edges only when some parent participates in differentiation.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(TensorImpl&)> backward_fn) {
    Tensor t = wrap(std::move(shape), std::move(data));
    bool rg = false;
    for (const auto& p : parents)
        if (p.defined() && p.impl_->requires_grad) rg = true;
    if (rg) {
        t.impl_->requires_grad = true;
        t.impl_->parents = std::move(parents);
        t.impl_->backward_fn = std::move(backward_fn);
    }
    return t;
}

int normalize_axis(int axis, std::int64_t ndim, const char* what) {
    int a = axis < 0 ? axis + static_cast<int>(ndim) : axis;
    if (a < 0 || a >= ndim)
        throw ShapeError(std::string(what) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(ndim));
    return a;
}

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size());
    std::int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

struct BcPlan {
    Shape out;
    std::vector<std::int64_t> sa, sb; // element strides per out dim, 0 on broadcast dims
};

BcPlan make_bc_plan(const Shape& a, const Shape& b, const char* opname) {
    const int na = static_cast<int>(a.size());
    const int nb = static_cast<int>(b.size());
    const int n = std::max(na, nb);
    auto stra = contiguous_strides(a);
    auto strb = contiguous_strides(b);
    BcPlan p;
    p.out.resize(n);
    p.sa.resize(n);
    p.sb.resize(n);
    for (int i = 0; i < n; ++i) {
        const int ia = na - n + i;
        const int ib = nb - n + i;
        const std::int64_t da = ia >= 0 ? a[ia] : 1;
        const std::int64_t db = ib >= 0 ? b[ib] : 1;
        if (da == db) {
            p.out[i] = da;
            p.sa[i] = ia >= 0 ? stra[ia] : 0;
            p.sb[i] = ib >= 0 ? strb[ib] : 0;
        } else if (da == 1) {
            p.out[i] = db;
            p.sa[i] = 0;
            p.sb[i] = strb[ib];
        } else if (db == 1) {
            p.out[i] = da;
            p.sa[i] = stra[ia];
            p.sb[i] = 0;
        } else {
            throw ShapeError(std::string(opname) + ": incompatible shapes " + shape_str(a) +
                             " and " + shape_str(b));
        }
    }
    return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void bc_loop(const BcPlan& p, F&& f) {
    const int n = static_cast<int>(p.out.size());
    const std::int64_t total = shape_numel(p.out);
    if (n == 0) {
        f(0, 0, 0);
        return;
    }
    std::vector<std::int64_t> counter(n, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t i = 0; i < total; ++i) {
        f(i, ia, ib);
        for (int d = n - 1; d >= 0; --d) {
            ++counter[d];
            ia += p.sa[d];
            ib += p.sb[d];
            if (counter[d] < p.out[d]) break;
            counter[d] = 0;
            ia -= p.sa[d] * p.out[d];
            ib -= p.sb[d] * p.out[d];
        }
    }
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void require_defined(const Tensor& t, const char* opname) {
    if (!t.defined()) throw InvalidInputError(std::string(opname) + ": undefined tensor operand");
}

// Shared skeleton for add/sub/mul/div.
template <class FwdSame, class FwdBc, class Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, FwdSame fwd_same, FwdBc fwd_bc,
                 Bwd bwd) {
    require_defined(a, name);
    require_defined(b, name);
    const auto& ad = a.impl_->data;
    const auto& bd = b.impl_->data;
    if (same_shape(a.shape(), b.shape())) {
        std::vector<double> out(ad.size());
        fwd_same(ad, bd, out);
        BcPlan plan; // trivial plan, reused by backward for shape bookkeeping
        plan.out = a.shape();
        return make_result(a.shape(), std::move(out), {a, b},
                           [bwd, ai = a.impl_, bi = b.impl_](TensorImpl& self) {
                               const std::int64_t n = self.numel();
                               if (ai->requires_grad) ai->ensure_grad();
                               if (bi->requires_grad) bi->ensure_grad();
                               for (std::int64_t i = 0; i < n; ++i)
                                   bwd(self.grad[i], i, i, *ai, *bi);
                           });
    }
    BcPlan plan = make_bc_plan(a.shape(), b.shape(), name);
    std::vector<double> out(shape_numel(plan.out));
    bc_loop(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        out[i] = fwd_bc(ad[ia], bd[ib]);
    });
    return make_result(plan.out, std::move(out), {a, b},
                       [bwd, plan, ai = a.impl_, bi = b.impl_](TensorImpl& self) {
                           if (ai->requires_grad) ai->ensure_grad();
                           if (bi->requires_grad) bi->ensure_grad();
                           bc_loop(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                               bwd(self.grad[i], ia, ib, *ai, *bi);
                           });
                       });
}

// Elementwise unary with derivative expressed from input and output values.
template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
    require_defined(a, name);
    const auto& ad = a.impl_->data;
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i]);
    return make_result(a.shape(), std::move(out), {a},
                       [deriv, ai = a.impl_](TensorImpl& self) {
                           if (!ai->requires_grad) return;
                           ai->ensure_grad();
                           const std::int64_t n = self.numel();
                           for (std::int64_t i = 0; i < n; ++i)
                               ai->grad[i] += self.grad[i] * deriv(ai->data[i], self.data[i]);
                       });
}

struct AxisSplit {
    std::int64_t outer, len, inner;
};

AxisSplit axis_split(const Shape& s, int axis) {
    AxisSplit sp{1, s[axis], 1};
    for (int i = 0; i < axis; ++i) sp.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
    return sp;
}

Shape drop_or_keep_axis(const Shape& s, int axis, bool keepdim) {
    Shape out = s;
    if (keepdim) {
        out[axis] = 1;
    } else {
        out.erase(out.begin() + axis);
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor basics

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape(shape);
    std::int64_t n = shape_numel(shape);
    Tensor t = wrap(std::move(shape), std::vector<double>(n, 0.0));
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    std::int64_t n = shape_numel(shape);
    Tensor t = wrap(std::move(shape), std::vector<double>(n, value));
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("from_data: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    Tensor t = wrap(std::move(shape), std::move(data));
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& gen, double stddev, bool requires_grad) {
    check_shape(shape);
    std::int64_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (auto& v : data) v = draw_normal(gen) * stddev;
    return from_data(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
    require_defined(*this, "shape");
    return impl_->shape;
}

std::int64_t Tensor::ndim() const { return static_cast<std::int64_t>(shape().size()); }

std::int64_t Tensor::dim(int axis) const {
    int a = normalize_axis(axis, ndim(), "dim");
    return impl_->shape[a];
}

std::int64_t Tensor::numel() const {
    require_defined(*this, "numel");
    return impl_->numel();
}

const std::vector<double>& Tensor::data() const {
    require_defined(*this, "data");
    return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
    require_defined(*this, "mutable_data");
    return impl_->data;
}

double Tensor::value() const {
    require_defined(*this, "value");
    if (impl_->numel() != 1) throw ShapeError("value: tensor is not scalar, shape " + shape_str(impl_->shape));
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    require_defined(*this, "at");
    if (static_cast<std::int64_t>(idx.size()) != ndim())
        throw ShapeError("at: index rank mismatch");
    auto strides = contiguous_strides(impl_->shape);
    std::int64_t lin = 0;
    int d = 0;
    for (auto i : idx) {
        if (i < 0 || i >= impl_->shape[d]) throw InvalidInputError("at: index out of range");
        lin += i * strides[d];
        ++d;
    }
    return impl_->data[lin];
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
    require_defined(*this, "grad");
    if (impl_->grad.size() != impl_->data.size())
        throw InvalidInputError("grad: no gradient has been accumulated");
    return impl_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
    require_defined(*this, "mutable_grad");
    impl_->ensure_grad();
    return impl_->grad;
}

void Tensor::zero_grad() {
    require_defined(*this, "zero_grad");
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    require_defined(*this, "detach");
    return wrap(impl_->shape, impl_->data);
}

void Tensor::backward() {
    require_defined(*this, "backward");
    if (impl_->numel() != 1) throw InvalidInputError("backward: root must be scalar");
    if (!impl_->requires_grad) return;

    // Post-order DFS; reversing gives an order where each node runs before
    // its parents receive their full gradient from elsewhere being needed.
    struct Frame {
        TensorImpl* node;
        std::size_t next;
    };
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<Frame> stack;
    stack.push_back({impl_.get(), 0});
    visited.insert(impl_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            TensorImpl* p = f.node->parents[f.next++].impl_.get();
            if (p && p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    impl_->ensure_grad();
    impl_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add",
        [](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& o) {
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
        },
        [](double x, double y) { return x + y; },
        [](double go, std::int64_t ia, std::int64_t ib, TensorImpl& ai, TensorImpl& bi) {
            if (ai.requires_grad) ai.grad[ia] += go;
            if (bi.requires_grad) bi.grad[ib] += go;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub",
        [](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& o) {
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
        },
        [](double x, double y) { return x - y; },
        [](double go, std::int64_t ia, std::int64_t ib, TensorImpl& ai, TensorImpl& bi) {
            if (ai.requires_grad) ai.grad[ia] += go;
            if (bi.requires_grad) bi.grad[ib] -= go;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul",
        [](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& o) {
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
        },
        [](double x, double y) { return x * y; },
        [](double go, std::int64_t ia, std::int64_t ib, TensorImpl& ai, TensorImpl& bi) {
            if (ai.requires_grad) ai.grad[ia] += go * bi.data[ib];
            if (bi.requires_grad) bi.grad[ib] += go * ai.data[ia];
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div",
        [](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& o) {
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / y[i];
        },
        [](double x, double y) { return x / y; },
        [](double go, std::int64_t ia, std::int64_t ib, TensorImpl& ai, TensorImpl& bi) {
            const double inv = 1.0 / bi.data[ib];
            if (ai.requires_grad) ai.grad[ia] += go * inv;
            if (bi.requires_grad) bi.grad[ib] -= go * ai.data[ia] * inv * inv;
        });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_op(a, "add_scalar", [s](double x) { return x + s; },
                    [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary_op(a, "mul_scalar", [s](double x) { return x * s; },
                    [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) {
    return unary_op(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, "exp", [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op(a, "log", [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
    return unary_op(a, "abs", [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_op(a, "gelu",
                    [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
                    [=](double x, double) {
                        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                        return cdf + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
                    });
}

Tensor tanh(const Tensor& a) {
    return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp_min(const Tensor& a, double lo) {
    return unary_op(a, "clamp_min", [lo](double x) { return x < lo ? lo : x; },
                    [lo](double x, double) { return x >= lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Structure

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(sa) + " and " +
                         shape_str(sb));
    const std::int64_t k = sa.back();
    if (sb[sb.size() - 2] != k)
        throw ShapeError("matmul: inner dimensions disagree between " + shape_str(sa) + " and " +
                         shape_str(sb));
    const std::int64_t n = sb.back();

    if (sb.size() == 2) {
        // Shared right operand: flatten all leading dims into one GEMM.
        const std::int64_t rows = a.numel() / k;
        Shape out_shape(sa.begin(), sa.end() - 1);
        out_shape.push_back(n);
        std::vector<double> out(rows * n);
        CMapMat A(a.data().data(), rows, k);
        CMapMat B(b.data().data(), k, n);
        MapMat(out.data(), rows, n).noalias() = A * B;
        return make_result(out_shape, std::move(out), {a, b},
                           [rows, k, n, ai = a.impl_, bi = b.impl_](TensorImpl& self) {
                               CMapMat G(self.grad.data(), rows, n);
                               if (ai->requires_grad) {
                                   ai->ensure_grad();
                                   CMapMat B(bi->data.data(), k, n);
                                   MapMat(ai->grad.data(), rows, k).noalias() += G * B.transpose();
                               }
                               if (bi->requires_grad) {
                                   bi->ensure_grad();
                                   CMapMat A(ai->data.data(), rows, k);
                                   MapMat(bi->grad.data(), k, n).noalias() += A.transpose() * G;
                               }
                           });
    }

    if (sa.size() != sb.size() ||
        !std::equal(sa.begin(), sa.end() - 2, sb.begin()))
        throw ShapeError("matmul: batch dimensions disagree between " + shape_str(sa) + " and " +
                         shape_str(sb));
    const std::int64_t m = sa[sa.size() - 2];
    std::int64_t batch = 1;
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
    Shape out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);
    std::vector<double> out(batch * m * n);
    for (std::int64_t s = 0; s < batch; ++s) {
        CMapMat A(a.data().data() + s * m * k, m, k);
        CMapMat B(b.data().data() + s * k * n, k, n);
        MapMat(out.data() + s * m * n, m, n).noalias() = A * B;
    }
    return make_result(out_shape, std::move(out), {a, b},
                       [batch, m, k, n, ai = a.impl_, bi = b.impl_](TensorImpl& self) {
                           if (ai->requires_grad) ai->ensure_grad();
                           if (bi->requires_grad) bi->ensure_grad();
                           for (std::int64_t s = 0; s < batch; ++s) {
                               CMapMat G(self.grad.data() + s * m * n, m, n);
                               if (ai->requires_grad) {
                                   CMapMat B(bi->data.data() + s * k * n, k, n);
                                   MapMat(ai->grad.data() + s * m * k, m, k).noalias() +=
                                       G * B.transpose();
                               }
                               if (bi->requires_grad) {
                                   CMapMat A(ai->data.data() + s * m * k, m, k);
                                   MapMat(bi->grad.data() + s * k * n, k, n).noalias() +=
                                       A.transpose() * G;
                               }
                           }
                       });
}

namespace {

std::vector<double> permute_two(const Shape& in_shape, const std::vector<double>& in, int d0,
                                int d1, Shape& out_shape) {
    const int nd = static_cast<int>(in_shape.size());
    out_shape = in_shape;
    std::swap(out_shape[d0], out_shape[d1]);
    auto in_strides = contiguous_strides(in_shape);
    // stride of output dim d in the input buffer
    std::vector<std::int64_t> map_strides(nd);
    for (int d = 0; d < nd; ++d) map_strides[d] = in_strides[d];
    std::swap(map_strides[d0], map_strides[d1]);

    std::vector<double> out(in.size());
    std::vector<std::int64_t> counter(nd, 0);
    std::int64_t src = 0;
    const std::int64_t total = static_cast<std::int64_t>(in.size());
    for (std::int64_t i = 0; i < total; ++i) {
        out[i] = in[src];
        for (int d = nd - 1; d >= 0; --d) {
            ++counter[d];
            src += map_strides[d];
            if (counter[d] < out_shape[d]) break;
            counter[d] = 0;
            src -= map_strides[d] * out_shape[d];
        }
    }
    return out;
}

} // namespace

Tensor transpose(const Tensor& a, int axis0, int axis1) {
    require_defined(a, "transpose");
    const int d0 = normalize_axis(axis0, a.ndim(), "transpose");
    const int d1 = normalize_axis(axis1, a.ndim(), "transpose");
    Shape out_shape;
    std::vector<double> out = permute_two(a.shape(), a.data(), d0, d1, out_shape);
    return make_result(out_shape, std::move(out), {a},
                       [d0, d1, ai = a.impl_, out_shape](TensorImpl& self) {
                           if (!ai->requires_grad) return;
                           ai->ensure_grad();
                           Shape back_shape;
                           auto g = permute_two(out_shape, self.grad, d0, d1, back_shape);
                           for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
                       });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require_defined(a, "reshape");
    check_shape(shape);
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
    return make_result(std::move(shape), a.data(), {a}, [ai = a.impl_](TensorImpl& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) ai->grad[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw InvalidInputError("concat: no operands");
    for (const auto& p : parts) require_defined(p, "concat");
    const int ax = normalize_axis(axis, parts[0].ndim(), "concat");
    const Shape& base = parts[0].shape();
    std::int64_t total_axis = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != base.size())
            throw ShapeError("concat: rank mismatch between " + shape_str(base) + " and " +
                             shape_str(s));
        for (std::size_t d = 0; d < s.size(); ++d)
            if (static_cast<int>(d) != ax && s[d] != base[d])
                throw ShapeError("concat: shape mismatch between " + shape_str(base) + " and " +
                                 shape_str(s));
        total_axis += s[ax];
    }
    Shape out_shape = base;
    out_shape[ax] = total_axis;
    auto sp = axis_split(out_shape, ax);
    std::vector<double> out(shape_numel(out_shape));
    std::vector<std::int64_t> offsets; // start of each part along axis
    std::int64_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const auto& pd = p.data();
        const std::int64_t plen = p.shape()[ax];
        for (std::int64_t o = 0; o < sp.outer; ++o)
            std::memcpy(out.data() + (o * sp.len + off) * sp.inner,
                        pd.data() + o * plen * sp.inner,
                        static_cast<std::size_t>(plen * sp.inner) * sizeof(double));
        off += plen;
    }
    std::vector<Tensor> parents = parts;
    return make_result(out_shape, std::move(out), std::move(parents),
                       [sp, offsets, ax](TensorImpl& self) {
                           for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                               auto& p = *self.parents[pi].impl_;
                               if (!p.requires_grad) continue;
                               p.ensure_grad();
                               const std::int64_t plen = p.shape[ax];
                               const std::int64_t off = offsets[pi];
                               for (std::int64_t o = 0; o < sp.outer; ++o) {
                                   const double* src =
                                       self.grad.data() + (o * sp.len + off) * sp.inner;
                                   double* dst = p.grad.data() + o * plen * sp.inner;
                                   for (std::int64_t i = 0; i < plen * sp.inner; ++i)
                                       dst[i] += src[i];
                               }
                           }
                       });
}

Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t len) {
    require_defined(a, "slice");
    const int ax = normalize_axis(axis, a.ndim(), "slice");
    const Shape& s = a.shape();
    if (start < 0 || len <= 0 || start + len > s[ax])
        throw InvalidInputError("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") out of bounds for axis size " +
                                std::to_string(s[ax]));
    Shape out_shape = s;
    out_shape[ax] = len;
    auto sp = axis_split(s, ax);
    std::vector<double> out(shape_numel(out_shape));
    for (std::int64_t o = 0; o < sp.outer; ++o)
        std::memcpy(out.data() + o * len * sp.inner,
                    a.data().data() + (o * sp.len + start) * sp.inner,
                    static_cast<std::size_t>(len * sp.inner) * sizeof(double));
    return make_result(out_shape, std::move(out), {a},
                       [sp, start, len, ai = a.impl_](TensorImpl& self) {
                           if (!ai->requires_grad) return;
                           ai->ensure_grad();
                           for (std::int64_t o = 0; o < sp.outer; ++o) {
                               const double* src = self.grad.data() + o * len * sp.inner;
                               double* dst = ai->grad.data() + (o * sp.len + start) * sp.inner;
                               for (std::int64_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
                           }
                       });
}

Tensor index_select(const Tensor& a, int axis, const std::vector<std::int64_t>& indices) {
    require_defined(a, "index_select");
    const int ax = normalize_axis(axis, a.ndim(), "index_select");
    const Shape& s = a.shape();
    if (indices.empty()) throw InvalidInputError("index_select: empty index list");
    for (auto i : indices)
        if (i < 0 || i >= s[ax])
            throw InvalidInputError("index_select: index " + std::to_string(i) +
                                    " out of range for axis size " + std::to_string(s[ax]));
    Shape out_shape = s;
    out_shape[ax] = static_cast<std::int64_t>(indices.size());
    auto sp = axis_split(s, ax);
    const std::int64_t m = static_cast<std::int64_t>(indices.size());
    std::vector<double> out(shape_numel(out_shape));
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t j = 0; j < m; ++j)
            std::memcpy(out.data() + (o * m + j) * sp.inner,
                        a.data().data() + (o * sp.len + indices[j]) * sp.inner,
                        static_cast<std::size_t>(sp.inner) * sizeof(double));
    return make_result(out_shape, std::move(out), {a},
                       [sp, m, indices, ai = a.impl_](TensorImpl& self) {
                           if (!ai->requires_grad) return;
                           ai->ensure_grad();
                           for (std::int64_t o = 0; o < sp.outer; ++o)
                               for (std::int64_t j = 0; j < m; ++j) {
                                   const double* src = self.grad.data() + (o * m + j) * sp.inner;
                                   double* dst =
                                       ai->grad.data() + (o * sp.len + indices[j]) * sp.inner;
                                   for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                               }
                       });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::vector<std::int64_t>>& indices) {
    require_defined(a, "gather_rows");
    if (a.ndim() < 2) throw ShapeError("gather_rows: operand must have rank >= 2");
    const Shape& s = a.shape();
    const std::int64_t B = s[0];
    const std::int64_t n = s[1];
    if (static_cast<std::int64_t>(indices.size()) != B)
        throw ShapeError("gather_rows: need one index list per batch element");
    const std::int64_t m = static_cast<std::int64_t>(indices[0].size());
    std::int64_t rest = 1;
    for (std::size_t d = 2; d < s.size(); ++d) rest *= s[d];
    for (const auto& lst : indices) {
        if (static_cast<std::int64_t>(lst.size()) != m)
            throw ShapeError("gather_rows: ragged index lists");
        for (auto i : lst)
            if (i < 0 || i >= n) throw InvalidInputError("gather_rows: row index out of range");
    }
    Shape out_shape = s;
    out_shape[1] = m;
    std::vector<double> out(B * m * rest);
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < m; ++j)
            std::memcpy(out.data() + (b * m + j) * rest,
                        a.data().data() + (b * n + indices[b][j]) * rest,
                        static_cast<std::size_t>(rest) * sizeof(double));
    return make_result(out_shape, std::move(out), {a},
                       [B, n, m, rest, indices, ai = a.impl_](TensorImpl& self) {
                           if (!ai->requires_grad) return;
                           ai->ensure_grad();
                           for (std::int64_t b = 0; b < B; ++b)
                               for (std::int64_t j = 0; j < m; ++j) {
                                   const double* src = self.grad.data() + (b * m + j) * rest;
                                   double* dst = ai->grad.data() + (b * n + indices[b][j]) * rest;
                                   for (std::int64_t i = 0; i < rest; ++i) dst[i] += src[i];
                               }
                       });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return make_result({1}, {acc}, {a}, [ai = a.impl_](TensorImpl& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        const double g = self.grad[0];
        for (auto& v : ai->grad) v += g;
    });
}

Tensor sum(const Tensor& a, int axis, bool keepdim) {
    require_defined(a, "sum");
    const int ax = normalize_axis(axis, a.ndim(), "sum");
    auto sp = axis_split(a.shape(), ax);
    Shape out_shape = drop_or_keep_axis(a.shape(), ax, keepdim);
    if (out_shape.empty()) out_shape = {1};
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t j = 0; j < sp.len; ++j) {
            const double* src = ad.data() + (o * sp.len + j) * sp.inner;
            double* dst = out.data() + o * sp.inner;
            for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
    return make_result(out_shape, std::move(out), {a}, [sp, ai = a.impl_](TensorImpl& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t j = 0; j < sp.len; ++j) {
                const double* src = self.grad.data() + o * sp.inner;
                double* dst = ai->grad.data() + (o * sp.len + j) * sp.inner;
                for (std::int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
            }
    });
}

Tensor mean(const Tensor& a) {
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean(const Tensor& a, int axis, bool keepdim) {
    const int ax = normalize_axis(axis, a.ndim(), "mean");
    return mul_scalar(sum(a, ax, keepdim), 1.0 / static_cast<double>(a.shape()[ax]));
}

namespace {

template <bool Max>
Tensor extremum_over_axis(const Tensor& a, int axis, bool keepdim, const char* name) {
    require_defined(a, name);
    const int ax = normalize_axis(axis, a.ndim(), name);
    auto sp = axis_split(a.shape(), ax);
    Shape out_shape = drop_or_keep_axis(a.shape(), ax, keepdim);
    if (out_shape.empty()) out_shape = {1};
    std::vector<double> out(sp.outer * sp.inner);
    // argmax/argmin positions in the input buffer, one per output element
    auto arg = std::make_shared<std::vector<std::int64_t>>(sp.outer * sp.inner);
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            std::int64_t best_pos = (o * sp.len) * sp.inner + i;
            double best = ad[best_pos];
            for (std::int64_t j = 1; j < sp.len; ++j) {
                const std::int64_t pos = (o * sp.len + j) * sp.inner + i;
                const double v = ad[pos];
                // strict comparison keeps the lowest index on ties
                if (Max ? (v > best) : (v < best)) {
                    best = v;
                    best_pos = pos;
                }
            }
            out[o * sp.inner + i] = best;
            (*arg)[o * sp.inner + i] = best_pos;
        }
    return make_result(out_shape, std::move(out), {a}, [arg, ai = a.impl_](TensorImpl& self) {
        if (!ai->requires_grad) return;
        ai->ensure_grad();
        for (std::size_t i = 0; i < arg->size(); ++i) ai->grad[(*arg)[i]] += self.grad[i];
    });
}

} // namespace

Tensor max_over_axis(const Tensor& a, int axis, bool keepdim) {
    return extremum_over_axis<true>(a, axis, keepdim, "max_over_axis");
}

Tensor min_over_axis(const Tensor& a, int axis, bool keepdim) {
    return extremum_over_axis<false>(a, axis, keepdim, "min_over_axis");
}

Tensor softmax_over_axis(const Tensor& a, int axis) {
    require_defined(a, "softmax_over_axis");
    const int ax = normalize_axis(axis, a.ndim(), "softmax_over_axis");
    auto sp = axis_split(a.shape(), ax);
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t j = 0; j < sp.len; ++j)
                mx = std::max(mx, ad[(o * sp.len + j) * sp.inner + i]);
            double norm = 0.0;
            for (std::int64_t j = 0; j < sp.len; ++j) {
                const std::int64_t pos = (o * sp.len + j) * sp.inner + i;
                out[pos] = std::exp(ad[pos] - mx);
                norm += out[pos];
            }
            const double inv = 1.0 / norm;
            for (std::int64_t j = 0; j < sp.len; ++j) out[(o * sp.len + j) * sp.inner + i] *= inv;
        }
    Tensor result = make_result(a.shape(), std::move(out), {a}, nullptr);
    if (result.impl_->requires_grad) {
        result.impl_->backward_fn = [sp, ai = a.impl_, oi = result.impl_.get()](TensorImpl& self) {
            (void)oi;
            if (!ai->requires_grad) return;
            ai->ensure_grad();
            const auto& y = self.data;
            for (std::int64_t o = 0; o < sp.outer; ++o)
                for (std::int64_t i = 0; i < sp.inner; ++i) {
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < sp.len; ++j) {
                        const std::int64_t pos = (o * sp.len + j) * sp.inner + i;
                        dot += self.grad[pos] * y[pos];
                    }
                    for (std::int64_t j = 0; j < sp.len; ++j) {
                        const std::int64_t pos = (o * sp.len + j) * sp.inner + i;
                        ai->grad[pos] += (self.grad[pos] - dot) * y[pos];
                    }
                }
        };
    }
    return result;
}

} // namespace gsmae
