#pragma once

// Dense N-dimensional tensors with tape-based reverse-mode differentiation.
//
// Tensors are value types wrapping a shared node (shape + row-major data +
// optional gradient buffer). Operations are free functions; while a Tape is
// active on the current thread, every op whose inputs require gradients
// appends one backward step to it. backward(loss) replays the recorded steps
// in reverse, which visits each operation exactly once in reverse
// topological order because the tape is an execution-ordered record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xrv/errors.hpp"
#include "xrv/rng.hpp"

namespace xrv {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (std::size_t d : s) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
        n *= d;
    }
    return n;
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until backward touches this node
    bool requires_grad = false;
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape) { return full(shape, T(0)); }
    static Tensor ones(const Shape& shape) { return full(shape, T(1)); }

    static Tensor full(const Shape& shape, T value) {
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = shape;
        node->data.assign(shape_numel(shape), value);
        return Tensor(std::move(node));
    }

    // Seeded normal fill; bit-identical for a fixed seed.
    static Tensor randn(const Shape& shape, T mean, T stddev, std::uint64_t seed) {
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = shape;
        node->data.resize(shape_numel(shape));
        Rng rng(seed);
        for (T& v : node->data) v = static_cast<T>(rng.normal(static_cast<double>(mean), static_cast<double>(stddev)));
        return Tensor(std::move(node));
    }

    // Seeded uniform fill over [lo, hi); used by scaled-uniform weight init.
    static Tensor rand_uniform(const Shape& shape, T lo, T hi, std::uint64_t seed) {
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = shape;
        node->data.resize(shape_numel(shape));
        Rng rng(seed);
        for (T& v : node->data) v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        return Tensor(std::move(node));
    }

    static Tensor from_data(const Shape& shape, std::vector<T> values) {
        std::size_t n = shape_numel(shape);
        if (values.size() != n) {
            throw ShapeError("data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
        }
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = shape;
        node->data = std::move(values);
        return Tensor(std::move(node));
    }

    static Tensor scalar(T value) { return full({1}, value); }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }

    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }

    T item() const {
        if (size() != 1) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
        return node_->data[0];
    }

    T& at(std::initializer_list<std::size_t> idx) { return node_->data[flat_index(idx)]; }
    const T& at(std::initializer_list<std::size_t> idx) const { return node_->data[flat_index(idx)]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }

    const std::vector<T>& grad() const {
        if (node_->grad.empty()) throw ContractError("gradient has not been populated; run backward() first");
        return node_->grad;
    }

    // Allocates a zeroed gradient buffer if absent.
    std::vector<T>& ensure_grad() const {
        if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
        return node_->grad;
    }

    void clear_grad() { node_->grad.clear(); }

    // Deep copy of data; gradient state is not copied.
    Tensor clone() const {
        auto node = std::make_shared<TensorNode<T>>();
        node->shape = node_->shape;
        node->data = node_->data;
        return Tensor(std::move(node));
    }

    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

    std::size_t flat_index(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != node_->shape.size()) {
            throw ShapeError("index rank " + std::to_string(idx.size()) +
                             " does not match tensor rank " + std::to_string(node_->shape.size()));
        }
        std::size_t flat = 0;
        std::size_t d = 0;
        for (std::size_t i : idx) {
            if (i >= node_->shape[d]) throw ShapeError("index out of range in dimension " + std::to_string(d));
            flat = flat * node_->shape[d] + i;
            ++d;
        }
        return flat;
    }

    std::shared_ptr<TensorNode<T>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Execution-ordered record of backward steps. Constructing a Tape activates
// it on the current thread; destruction restores the previous one, so scoped
// tapes nest. Single-threaded by contract; independent threads get
// independent tapes for free via thread_local.
template <typename T>
class Tape {
public:
    Tape() : prev_(current_) { current_ = this; }
    ~Tape() { current_ = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return current_; }

    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    std::size_t size() const { return steps_.size(); }

    void replay_backward() {
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    // Suspends recording, e.g. while evaluating finite differences.
    class Pause {
    public:
        Pause() : saved_(current_) { current_ = nullptr; }
        ~Pause() { current_ = saved_; }
        Pause(const Pause&) = delete;
        Pause& operator=(const Pause&) = delete;

    private:
        Tape* saved_;
    };

private:
    std::vector<std::function<void()>> steps_;
    Tape* prev_;
    inline static thread_local Tape* current_ = nullptr;
};

namespace detail {

template <typename T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
    if (Tape<T>::active() == nullptr) return false;
    for (const Tensor<T>* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

// Axis decomposition for lane-wise ops: outer * axis_len * inner.
struct AxisSplit {
    std::size_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& shape, int axis) {
    int nd = static_cast<int>(shape.size());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int d = 0; d < axis; ++d) s.outer *= shape[static_cast<std::size_t>(d)];
    for (int d = axis + 1; d < nd; ++d) s.inner *= shape[static_cast<std::size_t>(d)];
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix product
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul expects 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }

    Tensor<T> out = Tensor<T>::zeros({m, n});
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = pa[i * k + kk];
            const T* brow = pb + kk * n;
            T* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }

    if (detail::recording<T>({&a, &b})) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record([an, bn, on, m, n, k] {
            if (on->grad.empty()) return;
            const T* dc = on->grad.data();
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->data.size(), T(0));
                auto& da = an->grad;
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        T acc = 0;
                        for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * bn->data[kk * n + j];
                        da[i * k + kk] += acc;
                    }
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->data.size(), T(0));
                auto& db = bn->grad;
                // dB = A^T * dC
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t j = 0; j < n; ++j) {
                        T acc = 0;
                        for (std::size_t i = 0; i < m; ++i) acc += an->data[i * k + kk] * dc[i * n + j];
                        db[kk * n + j] += acc;
                    }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops with trailing-dimension broadcasting
// ---------------------------------------------------------------------------

enum class EwOp { add, sub, mul };

namespace detail {

// b broadcasts over a iff b.shape equals the trailing dims of a.shape.
template <typename T>
std::size_t broadcast_repeat(const Tensor<T>& a, const Tensor<T>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sb.size() > sa.size()) {
        throw ShapeError("cannot broadcast " + shape_str(sb) + " onto smaller " + shape_str(sa));
    }
    std::size_t offset = sa.size() - sb.size();
    for (std::size_t d = 0; d < sb.size(); ++d) {
        if (sa[offset + d] != sb[d]) {
            throw ShapeError("shapes not broadcastable by trailing dimensions: " + shape_str(sa) + " vs " + shape_str(sb));
        }
    }
    return a.size() / b.size();
}

}  // namespace detail

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, EwOp op) {
    const std::size_t repeat = detail::broadcast_repeat(a, b);
    const std::size_t bn_size = b.size();

    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* po = out.data().data();
    for (std::size_t r = 0; r < repeat; ++r) {
        const std::size_t base = r * bn_size;
        for (std::size_t i = 0; i < bn_size; ++i) {
            switch (op) {
                case EwOp::add: po[base + i] = pa[base + i] + pb[i]; break;
                case EwOp::sub: po[base + i] = pa[base + i] - pb[i]; break;
                case EwOp::mul: po[base + i] = pa[base + i] * pb[i]; break;
            }
        }
    }

    if (detail::recording<T>({&a, &b})) {
        out.set_requires_grad(true);
        auto an = a.node(), bn = b.node(), on = out.node();
        Tape<T>::active()->record([an, bn, on, op, repeat, bn_size] {
            if (on->grad.empty()) return;
            const T* dy = on->grad.data();
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->data.size(), T(0));
                T* da = an->grad.data();
                for (std::size_t r = 0; r < repeat; ++r) {
                    const std::size_t base = r * bn_size;
                    for (std::size_t i = 0; i < bn_size; ++i) {
                        T g = dy[base + i];
                        if (op == EwOp::mul) g *= bn->data[i];
                        da[base + i] += g;
                    }
                }
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->data.size(), T(0));
                T* db = bn->grad.data();
                for (std::size_t r = 0; r < repeat; ++r) {
                    const std::size_t base = r * bn_size;
                    for (std::size_t i = 0; i < bn_size; ++i) {
                        T g = dy[base + i];
                        switch (op) {
                            case EwOp::add: db[i] += g; break;
                            case EwOp::sub: db[i] -= g; break;
                            case EwOp::mul: db[i] += g * an->data[base + i]; break;
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(a, b, EwOp::add); }
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(a, b, EwOp::sub); }
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(a, b, EwOp::mul); }

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * c;
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, c] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += on->grad[i] * c;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
    auto ax = detail::split_axis(x.shape(), axis);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.data().data();
    T* py = out.data().data();
    for (std::size_t o = 0; o < ax.outer; ++o) {
        for (std::size_t in = 0; in < ax.inner; ++in) {
            const std::size_t base = o * ax.n * ax.inner + in;
            T mx = px[base];
            for (std::size_t i = 1; i < ax.n; ++i) mx = std::max(mx, px[base + i * ax.inner]);
            T sum = 0;
            for (std::size_t i = 0; i < ax.n; ++i) {
                T e = std::exp(px[base + i * ax.inner] - mx);  // max-subtraction for stability
                py[base + i * ax.inner] = e;
                sum += e;
            }
            for (std::size_t i = 0; i < ax.n; ++i) py[base + i * ax.inner] /= sum;
        }
    }

    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, ax] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            const T* y = on->data.data();
            const T* dy = on->grad.data();
            T* dx = xn->grad.data();
            for (std::size_t o = 0; o < ax.outer; ++o) {
                for (std::size_t in = 0; in < ax.inner; ++in) {
                    const std::size_t base = o * ax.n * ax.inner + in;
                    T dot = 0;
                    for (std::size_t i = 0; i < ax.n; ++i) dot += dy[base + i * ax.inner] * y[base + i * ax.inner];
                    for (std::size_t i = 0; i < ax.n; ++i) {
                        const std::size_t idx = base + i * ax.inner;
                        dx[idx] += y[idx] * (dy[idx] - dot);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

// tanh-approximation constants; fixed so tests can pin exact values.
inline constexpr double kGeluSqrt2OverPi = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluCubicCoeff = 0.044715;

enum class Activation { relu, gelu };

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.data().data();
    T* py = out.data().data();
    const T k = static_cast<T>(kGeluSqrt2OverPi);
    const T c = static_cast<T>(kGeluCubicCoeff);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (kind == Activation::relu) {
            py[i] = px[i] > T(0) ? px[i] : T(0);
        } else {
            const T v = px[i];
            py[i] = T(0.5) * v * (T(1) + std::tanh(k * (v + c * v * v * v)));
        }
    }

    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, kind, k, c] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < xn->data.size(); ++i) {
                const T v = xn->data[i];
                T d;
                if (kind == Activation::relu) {
                    d = v > T(0) ? T(1) : T(0);
                } else {
                    const T u = k * (v + c * v * v * v);
                    const T t = std::tanh(u);
                    d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * k * (T(1) + T(3) * c * v * v);
                }
                xn->grad[i] += on->grad[i] * d;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) { return activation(x, Activation::relu); }
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) { return activation(x, Activation::gelu); }

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

enum class Reduce { sum, mean };

template <typename T>
Tensor<T> reduce_all(const Tensor<T>& x, Reduce op) {
    T acc = 0;
    for (T v : x.data()) acc += v;
    const T scale = op == Reduce::mean ? T(1) / static_cast<T>(x.size()) : T(1);
    Tensor<T> out = Tensor<T>::scalar(acc * scale);

    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, scale] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            const T g = on->grad[0] * scale;
            for (T& d : xn->grad) d += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& x, Reduce op, int axis) {
    auto ax = detail::split_axis(x.shape(), axis);
    int norm_axis = axis < 0 ? axis + static_cast<int>(x.ndim()) : axis;

    Shape out_shape;
    for (int d = 0; d < static_cast<int>(x.ndim()); ++d) {
        if (d != norm_axis) out_shape.push_back(x.shape()[static_cast<std::size_t>(d)]);
    }
    if (out_shape.empty()) out_shape = {1};

    const T scale = op == Reduce::mean ? T(1) / static_cast<T>(ax.n) : T(1);
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const T* px = x.data().data();
    T* py = out.data().data();
    for (std::size_t o = 0; o < ax.outer; ++o) {
        for (std::size_t in = 0; in < ax.inner; ++in) {
            T acc = 0;
            for (std::size_t i = 0; i < ax.n; ++i) acc += px[o * ax.n * ax.inner + i * ax.inner + in];
            py[o * ax.inner + in] = acc * scale;
        }
    }

    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, ax, scale] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t o = 0; o < ax.outer; ++o)
                for (std::size_t in = 0; in < ax.inner; ++in) {
                    const T g = on->grad[o * ax.inner + in] * scale;
                    for (std::size_t i = 0; i < ax.n; ++i) xn->grad[o * ax.n * ax.inner + i * ax.inner + in] += g;
                }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) { return reduce_all(x, Reduce::sum); }
template <typename T>
Tensor<T> sum(const Tensor<T>& x, int axis) { return reduce_axis(x, Reduce::sum, axis); }
template <typename T>
Tensor<T> mean(const Tensor<T>& x) { return reduce_all(x, Reduce::mean); }
template <typename T>
Tensor<T> mean(const Tensor<T>& x, int axis) { return reduce_axis(x, Reduce::mean, axis); }

// ---------------------------------------------------------------------------
// Shape manipulation (gradient-transparent)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& new_shape) {
    if (shape_numel(new_shape) != x.size()) {
        throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(new_shape));
    }
    Tensor<T> out = Tensor<T>::from_data(new_shape, x.data());
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& x) {
    if (x.ndim() != 2) throw ShapeError("transpose2d expects a 2-D tensor, got " + shape_str(x.shape()));
    const std::size_t r = x.shape()[0], c = x.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = x.data()[i * c + j];
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, r, c] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) xn->grad[i * c + j] += on->grad[j * r + i];
        });
    }
    return out;
}

// Removes axis 0 at the given index: [D0, rest...] -> [rest...].
template <typename T>
Tensor<T> select0(const Tensor<T>& x, std::size_t index) {
    if (x.ndim() < 2) throw ShapeError("select0 expects rank >= 2, got " + shape_str(x.shape()));
    if (index >= x.shape()[0]) throw ShapeError("select0 index out of range");
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    const std::size_t stride = x.size() / x.shape()[0];
    std::vector<T> slice(x.data().begin() + static_cast<std::ptrdiff_t>(index * stride),
                         x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
    Tensor<T> out = Tensor<T>::from_data(out_shape, std::move(slice));
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, index, stride] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < stride; ++i) xn->grad[index * stride + i] += on->grad[i];
        });
    }
    return out;
}

// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("stack0 requires at least one tensor");
    const Shape& s0 = parts[0].shape();
    for (const auto& p : parts) {
        if (p.shape() != s0) throw ShapeError("stack0 requires equal shapes");
    }
    Shape out_shape;
    out_shape.push_back(parts.size());
    out_shape.insert(out_shape.end(), s0.begin(), s0.end());
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const std::size_t stride = parts[0].size();
    for (std::size_t p = 0; p < parts.size(); ++p) {
        std::copy(parts[p].data().begin(), parts[p].data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(p * stride));
    }

    bool rec = false;
    if (Tape<T>::active()) {
        for (const auto& p : parts)
            if (p.requires_grad()) { rec = true; break; }
    }
    if (rec) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        nodes.reserve(parts.size());
        for (const auto& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        Tape<T>::active()->record([nodes, on, stride] {
            if (on->grad.empty()) return;
            for (std::size_t p = 0; p < nodes.size(); ++p) {
                if (!nodes[p]->requires_grad) continue;
                if (nodes[p]->grad.empty()) nodes[p]->grad.assign(nodes[p]->data.size(), T(0));
                for (std::size_t i = 0; i < stride; ++i) nodes[p]->grad[i] += on->grad[p * stride + i];
            }
        });
    }
    return out;
}

// 2-D row/column slicing and concatenation; building blocks for attention heads.

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t r0, std::size_t r1) {
    if (x.ndim() != 2) throw ShapeError("slice_rows expects a 2-D tensor");
    if (r0 >= r1 || r1 > x.shape()[0]) throw ShapeError("slice_rows range invalid");
    const std::size_t cols = x.shape()[1];
    std::vector<T> vals(x.data().begin() + static_cast<std::ptrdiff_t>(r0 * cols),
                        x.data().begin() + static_cast<std::ptrdiff_t>(r1 * cols));
    Tensor<T> out = Tensor<T>::from_data({r1 - r0, cols}, std::move(vals));
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, r0, cols] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < on->data.size(); ++i) xn->grad[r0 * cols + i] += on->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1) {
    if (x.ndim() != 2) throw ShapeError("slice_cols expects a 2-D tensor");
    if (c0 >= c1 || c1 > x.shape()[1]) throw ShapeError("slice_cols range invalid");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1], width = c1 - c0;
    Tensor<T> out = Tensor<T>::zeros({rows, width});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < width; ++j) out.data()[i * width + j] = x.data()[i * cols + c0 + j];
    if (detail::recording<T>({&x})) {
        out.set_requires_grad(true);
        auto xn = x.node(), on = out.node();
        Tape<T>::active()->record([xn, on, rows, cols, c0, width] {
            if (on->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->data.size(), T(0));
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < width; ++j) xn->grad[i * cols + c0 + j] += on->grad[i * width + j];
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows requires at least one tensor");
    const std::size_t cols = parts[0].ndim() == 2 ? parts[0].shape()[1] : 0;
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.shape()[1] != cols) throw ShapeError("concat_rows requires 2-D tensors with equal column counts");
        rows += p.shape()[0];
    }
    Tensor<T> out = Tensor<T>::zeros({rows, cols});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.size();
    }

    bool rec = false;
    if (Tape<T>::active()) {
        for (const auto& p : parts)
            if (p.requires_grad()) { rec = true; break; }
    }
    if (rec) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        for (const auto& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        Tape<T>::active()->record([nodes, on] {
            if (on->grad.empty()) return;
            std::size_t offset = 0;
            for (const auto& n : nodes) {
                if (n->requires_grad) {
                    if (n->grad.empty()) n->grad.assign(n->data.size(), T(0));
                    for (std::size_t i = 0; i < n->data.size(); ++i) n->grad[i] += on->grad[offset + i];
                }
                offset += n->data.size();
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols requires at least one tensor");
    const std::size_t rows = parts[0].ndim() == 2 ? parts[0].shape()[0] : 0;
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.shape()[0] != rows) throw ShapeError("concat_cols requires 2-D tensors with equal row counts");
        cols += p.shape()[1];
    }
    Tensor<T> out = Tensor<T>::zeros({rows, cols});
    std::size_t col_off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.shape()[1];
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j) out.data()[i * cols + col_off + j] = p.data()[i * w + j];
        col_off += w;
    }

    bool rec = false;
    if (Tape<T>::active()) {
        for (const auto& p : parts)
            if (p.requires_grad()) { rec = true; break; }
    }
    if (rec) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorNode<T>>> nodes;
        std::vector<std::size_t> widths;
        for (const auto& p : parts) {
            nodes.push_back(p.node());
            widths.push_back(p.shape()[1]);
        }
        auto on = out.node();
        Tape<T>::active()->record([nodes, widths, on, rows, cols] {
            if (on->grad.empty()) return;
            std::size_t col_off = 0;
            for (std::size_t p = 0; p < nodes.size(); ++p) {
                const std::size_t w = widths[p];
                if (nodes[p]->requires_grad) {
                    if (nodes[p]->grad.empty()) nodes[p]->grad.assign(nodes[p]->data.size(), T(0));
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < w; ++j) nodes[p]->grad[i * w + j] += on->grad[i * cols + col_off + j];
                }
                col_off += w;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

// Populates d loss / d leaf for every requires_grad leaf reachable from loss.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) {
        throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    }
    Tape<T>* tape = Tape<T>::active();
    if (tape == nullptr) throw ContractError("backward requires an active tape");
    loss.ensure_grad()[0] += T(1);
    tape->replay_backward();
}

}  // namespace xrv
