#pragma once

// Dense n-dimensional arrays with tape-based reverse-mode automatic
// differentiation. The op set is exactly what the model needs: elementwise
// arithmetic and activations, batched matmul, grouped 1D convolution,
// softmax over the last dimension, layer norm, structural ops, and a
// numerically stable BCE-with-logits loss.
//
// Recording model: ops append a backward rule to the thread-local active
// Tape when one exists and an input requires gradients. Without an active
// tape every op is a pure forward computation. A tape and the tensors it
// references are confined to one thread for the duration of a pass.
// All loops run in a fixed order, so gradients are bit-reproducible.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecgformer/errors.hpp"

namespace ecgformer {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

template <class T>
class Tensor {
public:
    // Default tensor is a rank-0 scalar holding 0.
    Tensor() : values_(std::make_shared<std::vector<T>>(1, T(0))) {}

    explicit Tensor(Shape shape, bool requires_grad = false)
        : shape_(std::move(shape)),
          values_(std::make_shared<std::vector<T>>(shape_numel(shape_), T(0))) {
        if (requires_grad) set_requires_grad(true);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::fill(t.values().begin(), t.values().end(), value);
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_ = std::make_shared<std::vector<T>>(std::move(data));
        if (requires_grad) t.set_requires_grad(true);
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return full({}, value, requires_grad);
    }

    // Values drawn as doubles then cast, so parameter initialization is
    // identical across the float and double instantiations.
    static Tensor randn(Shape shape, std::mt19937& rng, double stddev = 1.0,
                        bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& v : t.values()) v = static_cast<T>(dist(rng));
        return t;
    }

    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t numel() const { return values_->size(); }
    size_t dim(size_t axis) const { return shape_.at(axis); }

    std::vector<T>& values() { return *values_; }
    const std::vector<T>& values() const { return *values_; }

    bool requires_grad() const { return grad_ != nullptr; }

    void set_requires_grad(bool on) {
        if (on && !grad_)
            grad_ = std::make_shared<std::vector<T>>(values_->size(), T(0));
        else if (!on)
            grad_ = nullptr;
    }

    std::vector<T>& grad() {
        if (!grad_) throw ValueError("tensor has no gradient buffer");
        return *grad_;
    }
    const std::vector<T>& grad() const {
        if (!grad_) throw ValueError("tensor has no gradient buffer");
        return *grad_;
    }

    void zero_grad() {
        if (grad_) std::fill(grad_->begin(), grad_->end(), T(0));
    }

    std::shared_ptr<std::vector<T>> values_ptr() const { return values_; }
    std::shared_ptr<std::vector<T>> grad_ptr() const { return grad_; }

    int64_t node_id() const { return node_id_; }

    T item() const {
        if (numel() != 1)
            throw ShapeError("item() expects a single-element tensor, got " +
                             shape_str(shape_));
        return (*values_)[0];
    }

    T at(std::initializer_list<size_t> idx) const {
        if (idx.size() != rank()) throw ShapeError("index rank mismatch");
        size_t flat = 0;
        auto it = idx.begin();
        for (size_t a = 0; a < rank(); ++a, ++it) flat = flat * shape_[a] + *it;
        return (*values_)[flat];
    }

private:
    static int64_t next_id() {
        static std::atomic<int64_t> counter{0};
        return counter.fetch_add(1, std::memory_order_relaxed);
    }

    Shape shape_;
    std::shared_ptr<std::vector<T>> values_;
    std::shared_ptr<std::vector<T>> grad_;
    int64_t node_id_ = next_id();
};

template <class T>
class TapePause;

// Recorded forward pass. Construction makes the tape active for the current
// thread; destruction restores the previous one.
template <class T>
class Tape {
public:
    struct Op {
        const char* name;
        std::vector<int64_t> inputs;
        int64_t output;
        std::shared_ptr<std::vector<T>> out_grad;
        std::function<void()> backward;
    };

    Tape() : prev_(active_) { active_ = this; }
    ~Tape() { active_ = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_; }

    void record(Op op) { ops_.push_back(std::move(op)); }
    size_t size() const { return ops_.size(); }
    const std::vector<Op>& ops() const { return ops_; }
    void clear() { ops_.clear(); }

    // Seeds dLoss/dLoss = 1 and replays recorded ops in reverse. Gradients of
    // intermediate (op output) tensors are reset first, so repeated calls
    // accumulate only into leaves.
    void backward(Tensor<T>& loss) {
        if (loss.numel() != 1)
            throw ShapeError("backward expects a scalar loss, got shape " +
                             shape_str(loss.shape()));
        if (ops_.empty()) throw ValueError("backward on an empty tape");
        if (!loss.requires_grad())
            throw ValueError("loss does not require gradients");
        for (auto& op : ops_)
            std::fill(op.out_grad->begin(), op.out_grad->end(), T(0));
        loss.grad()[0] += T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backward();
    }

private:
    friend class TapePause<T>;
    std::vector<Op> ops_;
    Tape* prev_ = nullptr;
    inline static thread_local Tape* active_ = nullptr;
};

// Suspends recording for the current thread (inference passes, finite
// differences) without tearing down the surrounding tape.
template <class T>
class TapePause {
public:
    TapePause() : prev_(Tape<T>::active_) { Tape<T>::active_ = nullptr; }
    ~TapePause() { Tape<T>::active_ = prev_; }
    TapePause(const TapePause&) = delete;
    TapePause& operator=(const TapePause&) = delete;

private:
    Tape<T>* prev_;
};

namespace detail {

template <class T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
    if (!Tape<T>::active()) return false;
    for (const Tensor<T>* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

template <class T, class Fn>
void record(const char* name, std::initializer_list<const Tensor<T>*> inputs,
            const Tensor<T>& out, Fn&& backward) {
    if (!out.requires_grad()) return;
    typename Tape<T>::Op op;
    op.name = name;
    for (const Tensor<T>* t : inputs) op.inputs.push_back(t->node_id());
    op.output = out.node_id();
    op.out_grad = out.grad_ptr();
    op.backward = std::forward<Fn>(backward);
    Tape<T>::active()->record(std::move(op));
}

// Broadcast contract: shapes equal, or the smaller operand's shape is a
// trailing suffix of the larger's (a one-element tensor broadcasts
// everywhere). Row-major layout makes the broadcast index a plain modulo.
inline bool suffix_of(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    for (size_t i = 0; i < small.size(); ++i)
        if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
    return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops

enum class BinaryKind { add, sub, mul };

template <class T>
Tensor<T> binary_op(BinaryKind kind, const Tensor<T>& a_in, const Tensor<T>& b_in) {
    const Tensor<T>* a = &a_in;
    const Tensor<T>* b = &b_in;
    auto broadcastable = [](const Tensor<T>& x, const Tensor<T>& y) {
        return y.numel() == 1 || detail::suffix_of(y.shape(), x.shape());
    };
    if (a->shape() != b->shape()) {
        if (broadcastable(*a, *b)) {
            // b broadcasts over a's leading dimensions
        } else if (kind != BinaryKind::sub && broadcastable(*b, *a)) {
            std::swap(a, b);
        } else {
            throw ShapeError("incompatible shapes " + shape_str(a_in.shape()) +
                             " and " + shape_str(b_in.shape()));
        }
    }

    const size_t n = a->numel();
    const size_t nb = b->numel();
    Tensor<T> out(a->shape(), detail::should_record<T>({a, b}));
    const T* av = a->values().data();
    const T* bv = b->values().data();
    T* ov = out.values().data();
    switch (kind) {
        case BinaryKind::add:
            for (size_t i = 0, j = 0; i < n; ++i) {
                ov[i] = av[i] + bv[j];
                if (++j == nb) j = 0;
            }
            break;
        case BinaryKind::sub:
            for (size_t i = 0, j = 0; i < n; ++i) {
                ov[i] = av[i] - bv[j];
                if (++j == nb) j = 0;
            }
            break;
        case BinaryKind::mul:
            for (size_t i = 0, j = 0; i < n; ++i) {
                ov[i] = av[i] * bv[j];
                if (++j == nb) j = 0;
            }
            break;
    }

    const char* name = kind == BinaryKind::add   ? "add"
                       : kind == BinaryKind::sub ? "sub"
                                                 : "mul";
    detail::record<T>(
        name, {a, b}, out,
        [kind, n, nb, avp = a->values_ptr(), bvp = b->values_ptr(),
         ag = a->grad_ptr(), bg = b->grad_ptr(), og = out.grad_ptr()]() {
            const T* go = og->data();
            if (ag) {
                T* da = ag->data();
                if (kind == BinaryKind::mul) {
                    const T* bv = bvp->data();
                    for (size_t i = 0, j = 0; i < n; ++i) {
                        da[i] += go[i] * bv[j];
                        if (++j == nb) j = 0;
                    }
                } else {
                    for (size_t i = 0; i < n; ++i) da[i] += go[i];
                }
            }
            if (bg) {
                T* db = bg->data();
                const T* av = avp->data();
                switch (kind) {
                    case BinaryKind::add:
                        for (size_t i = 0, j = 0; i < n; ++i) {
                            db[j] += go[i];
                            if (++j == nb) j = 0;
                        }
                        break;
                    case BinaryKind::sub:
                        for (size_t i = 0, j = 0; i < n; ++i) {
                            db[j] -= go[i];
                            if (++j == nb) j = 0;
                        }
                        break;
                    case BinaryKind::mul:
                        for (size_t i = 0, j = 0; i < n; ++i) {
                            db[j] += go[i] * av[i];
                            if (++j == nb) j = 0;
                        }
                        break;
                }
            }
        });
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(BinaryKind::add, a, b);
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(BinaryKind::sub, a, b);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(BinaryKind::mul, a, b);
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

template <class T, class Fwd, class Dfn>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, Fwd fwd, Dfn dfn) {
    Tensor<T> out(x.shape(), detail::should_record<T>({&x}));
    const size_t n = x.numel();
    const T* xv = x.values().data();
    T* ov = out.values().data();
    for (size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
    detail::record<T>(name, {&x}, out,
                      [n, dfn, xvp = x.values_ptr(), ovp = out.values_ptr(),
                       xg = x.grad_ptr(), og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T* go = og->data();
                          const T* xv = xvp->data();
                          const T* yv = ovp->data();
                          T* dx = xg->data();
                          for (size_t i = 0; i < n; ++i)
                              dx[i] += go[i] * dfn(xv[i], yv[i]);
                      });
    return out;
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
    return unary_op(
        "tanh", x, [](T v) { return std::tanh(v); },
        [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return unary_op(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary_op(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
    // Exact erf form; derivative is Phi(x) + x*phi(x).
    return unary_op(
        "gelu", x,
        [](T v) {
            return static_cast<T>(0.5 * double(v) *
                                  (1.0 + std::erf(double(v) * kInvSqrt2)));
        },
        [](T v, T) {
            const double d = double(v);
            const double cdf = 0.5 * (1.0 + std::erf(d * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * d * d);
            return static_cast<T>(cdf + d * pdf);
        });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, double c) {
    return unary_op(
        "scale", x, [c](T v) { return static_cast<T>(c * v); },
        [c](T, T) { return static_cast<T>(c); });
}

// ---------------------------------------------------------------------------
// Matrix multiply
//
// Two forms:
//   - weight multiply: a[..., M, K] @ b[K, P] with rank(b) == 2
//   - batched multiply: a[..., M, K] @ b[..., K, P] with equal leading dims

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw ShapeError("matmul needs rank >= 2 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));

    const size_t K = a.shape()[a.rank() - 1];
    const size_t M = a.shape()[a.rank() - 2];
    const bool weight_form = (b.rank() == 2 && a.rank() != b.rank()) ||
                             (a.rank() == 2 && b.rank() == 2);
    size_t P, batches;
    if (weight_form) {
        if (b.shape()[0] != K)
            throw ShapeError("matmul inner dimensions disagree: " +
                             shape_str(a.shape()) + " @ " + shape_str(b.shape()));
        P = b.shape()[1];
        batches = a.numel() / (M * K);
    } else {
        if (a.rank() != b.rank())
            throw ShapeError("matmul rank mismatch: " + shape_str(a.shape()) +
                             " @ " + shape_str(b.shape()));
        for (size_t i = 0; i + 2 < a.rank(); ++i)
            if (a.shape()[i] != b.shape()[i])
                throw ShapeError("matmul batch dimensions disagree: " +
                                 shape_str(a.shape()) + " @ " +
                                 shape_str(b.shape()));
        if (b.shape()[b.rank() - 2] != K)
            throw ShapeError("matmul inner dimensions disagree: " +
                             shape_str(a.shape()) + " @ " + shape_str(b.shape()));
        P = b.shape()[b.rank() - 1];
        batches = a.numel() / (M * K);
    }

    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(P);
    Tensor<T> out(out_shape, detail::should_record<T>({&a, &b}));

    const T* av = a.values().data();
    const T* bv = b.values().data();
    T* ov = out.values().data();
    for (size_t n = 0; n < batches; ++n) {
        const T* ab = av + n * M * K;
        const T* bb = weight_form ? bv : bv + n * K * P;
        T* ob = ov + n * M * P;
        for (size_t m = 0; m < M; ++m)
            for (size_t k = 0; k < K; ++k) {
                const T s = ab[m * K + k];
                const T* brow = bb + k * P;
                T* orow = ob + m * P;
                for (size_t p = 0; p < P; ++p) orow[p] += s * brow[p];
            }
    }

    detail::record<T>(
        "matmul", {&a, &b}, out,
        [M, K, P, batches, weight_form, avp = a.values_ptr(),
         bvp = b.values_ptr(), ag = a.grad_ptr(), bg = b.grad_ptr(),
         og = out.grad_ptr()]() {
            const T* av = avp->data();
            const T* bv = bvp->data();
            const T* go = og->data();
            for (size_t n = 0; n < batches; ++n) {
                const T* ab = av + n * M * K;
                const T* bb = weight_form ? bv : bv + n * K * P;
                const T* gb = go + n * M * P;
                if (ag) {
                    T* da = ag->data() + n * M * K;
                    // dA = dC * B^T
                    for (size_t m = 0; m < M; ++m)
                        for (size_t k = 0; k < K; ++k) {
                            T acc = T(0);
                            const T* grow = gb + m * P;
                            const T* brow = bb + k * P;
                            for (size_t p = 0; p < P; ++p) acc += grow[p] * brow[p];
                            da[m * K + k] += acc;
                        }
                }
                if (bg) {
                    T* db = weight_form ? bg->data() : bg->data() + n * K * P;
                    // dB = A^T * dC
                    for (size_t m = 0; m < M; ++m)
                        for (size_t k = 0; k < K; ++k) {
                            const T s = ab[m * K + k];
                            const T* grow = gb + m * P;
                            T* drow = db + k * P;
                            for (size_t p = 0; p < P; ++p) drow[p] += s * grow[p];
                        }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Grouped 1D convolution (cross-correlation, explicit padding, no dilation)
//
// x: [B, C_in, L], kernels: [C_out, C_in/groups, K], bias: [C_out] or empty.
// Depthwise convolution is groups == C_in. Group g's outputs depend only on
// group g's input channels.

template <class T>
Tensor<T> grouped_conv1d(const Tensor<T>& x, const Tensor<T>& kernels,
                         const Tensor<T>& bias, size_t stride, size_t groups,
                         size_t padding = 0) {
    if (x.rank() != 3)
        throw ShapeError("conv1d input must be [B, C, L], got " +
                         shape_str(x.shape()));
    if (kernels.rank() != 3)
        throw ShapeError("conv1d kernels must be [C_out, C_in/groups, K], got " +
                         shape_str(kernels.shape()));
    if (stride < 1) throw ConfigError("conv1d stride must be >= 1");
    const size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
    const size_t Cout = kernels.dim(0), Cing = kernels.dim(1), K = kernels.dim(2);
    if (groups == 0 || Cin % groups != 0 || Cout % groups != 0)
        throw ConfigError("conv1d groups must divide both channel counts");
    if (Cing != Cin / groups)
        throw ShapeError("conv1d kernel channel dim " + std::to_string(Cing) +
                         " does not match C_in/groups = " +
                         std::to_string(Cin / groups));
    if (!(bias.rank() == 1 && bias.dim(0) == Cout))
        throw ShapeError("conv1d bias must be [C_out]");
    const size_t Lp = L + 2 * padding;
    if (Lp < K)
        throw ValueError("conv1d input too short: length " + std::to_string(L) +
                         " (+2*" + std::to_string(padding) +
                         " padding) < kernel length " + std::to_string(K));
    const size_t Lout = (Lp - K) / stride + 1;
    const size_t Coutg = Cout / groups;

    Tensor<T> out(Shape{B, Cout, Lout},
                  detail::should_record<T>({&x, &kernels, &bias}));
    const T* xv = x.values().data();
    const T* wv = kernels.values().data();
    const T* bvv = bias.values().data();
    T* ov = out.values().data();

    const long pad = static_cast<long>(padding);
    for (size_t b = 0; b < B; ++b)
        for (size_t g = 0; g < groups; ++g)
            for (size_t ocg = 0; ocg < Coutg; ++ocg) {
                const size_t oc = g * Coutg + ocg;
                T* orow = ov + (b * Cout + oc) * Lout;
                const T* wk = wv + oc * Cing * K;
                for (size_t t = 0; t < Lout; ++t) {
                    T acc = bvv[oc];
                    const long base = static_cast<long>(t * stride) - pad;
                    for (size_t icg = 0; icg < Cing; ++icg) {
                        const size_t ic = g * Cing + icg;
                        const T* xrow = xv + (b * Cin + ic) * L;
                        const T* wrow = wk + icg * K;
                        for (size_t k = 0; k < K; ++k) {
                            const long pos = base + static_cast<long>(k);
                            if (pos >= 0 && pos < static_cast<long>(L))
                                acc += xrow[pos] * wrow[k];
                        }
                    }
                    orow[t] = acc;
                }
            }

    detail::record<T>(
        "grouped_conv1d", {&x, &kernels, &bias}, out,
        [B, Cin, L, Cout, Cing, Coutg, K, Lout, stride, groups, pad,
         xvp = x.values_ptr(), wvp = kernels.values_ptr(), xg = x.grad_ptr(),
         wg = kernels.grad_ptr(), bgr = bias.grad_ptr(), og = out.grad_ptr()]() {
            const T* xv = xvp->data();
            const T* wv = wvp->data();
            const T* go = og->data();
            for (size_t b = 0; b < B; ++b)
                for (size_t g = 0; g < groups; ++g)
                    for (size_t ocg = 0; ocg < Coutg; ++ocg) {
                        const size_t oc = g * Coutg + ocg;
                        const T* grow = go + (b * Cout + oc) * Lout;
                        const T* wk = wv + oc * Cing * K;
                        T* dwk = wg ? wg->data() + oc * Cing * K : nullptr;
                        for (size_t t = 0; t < Lout; ++t) {
                            const T gv = grow[t];
                            if (bgr) (*bgr)[oc] += gv;
                            const long base =
                                static_cast<long>(t * stride) - pad;
                            for (size_t icg = 0; icg < Cing; ++icg) {
                                const size_t ic = g * Cing + icg;
                                const size_t row = (b * Cin + ic) * L;
                                for (size_t k = 0; k < K; ++k) {
                                    const long pos =
                                        base + static_cast<long>(k);
                                    if (pos < 0 || pos >= static_cast<long>(L))
                                        continue;
                                    if (xg)
                                        (*xg)[row + pos] +=
                                            gv * wk[icg * K + k];
                                    if (dwk)
                                        dwk[icg * K + k] +=
                                            gv * xv[row + pos];
                                }
                            }
                        }
                    }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Softmax over the last dimension, with max subtraction for overflow safety.

template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    if (x.rank() == 0) throw ShapeError("softmax needs rank >= 1");
    const size_t D = x.shape().back();
    const size_t rows = x.numel() / D;
    Tensor<T> out(x.shape(), detail::should_record<T>({&x}));
    const T* xv = x.values().data();
    T* ov = out.values().data();
    for (size_t r = 0; r < rows; ++r) {
        const T* xr = xv + r * D;
        T* orow = ov + r * D;
        T m = xr[0];
        for (size_t d = 1; d < D; ++d) m = std::max(m, xr[d]);
        T sum = T(0);
        for (size_t d = 0; d < D; ++d) {
            orow[d] = std::exp(xr[d] - m);
            sum += orow[d];
        }
        const T inv = T(1) / sum;
        for (size_t d = 0; d < D; ++d) orow[d] *= inv;
    }
    detail::record<T>("softmax", {&x}, out,
                      [rows, D, ovp = out.values_ptr(), xg = x.grad_ptr(),
                       og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T* yv = ovp->data();
                          const T* go = og->data();
                          T* dx = xg->data();
                          for (size_t r = 0; r < rows; ++r) {
                              const T* y = yv + r * D;
                              const T* g = go + r * D;
                              T dot = T(0);
                              for (size_t d = 0; d < D; ++d) dot += g[d] * y[d];
                              for (size_t d = 0; d < D; ++d)
                                  dx[r * D + d] += y[d] * (g[d] - dot);
                          }
                      });
    return out;
}

// ---------------------------------------------------------------------------
// Layer normalization over the last dimension with affine gain/shift.

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& shift, double eps = 1e-5) {
    if (x.rank() == 0) throw ShapeError("layer_norm needs rank >= 1");
    const size_t D = x.shape().back();
    if (!(gain.rank() == 1 && gain.dim(0) == D) ||
        !(shift.rank() == 1 && shift.dim(0) == D))
        throw ShapeError("layer_norm gain/shift must match last dim " +
                         std::to_string(D));
    const size_t rows = x.numel() / D;
    Tensor<T> out(x.shape(), detail::should_record<T>({&x, &gain, &shift}));
    // normalized values cached for backward
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    auto inv_std = std::make_shared<std::vector<T>>(rows);

    const T* xv = x.values().data();
    const T* gv = gain.values().data();
    const T* sv = shift.values().data();
    T* ov = out.values().data();
    for (size_t r = 0; r < rows; ++r) {
        const T* xr = xv + r * D;
        T mean = T(0);
        for (size_t d = 0; d < D; ++d) mean += xr[d];
        mean /= T(D);
        T var = T(0);
        for (size_t d = 0; d < D; ++d) {
            const T c = xr[d] - mean;
            var += c * c;
        }
        var /= T(D);
        const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
        (*inv_std)[r] = inv;
        for (size_t d = 0; d < D; ++d) {
            const T h = (xr[d] - mean) * inv;
            (*xhat)[r * D + d] = h;
            ov[r * D + d] = h * gv[d] + sv[d];
        }
    }

    detail::record<T>(
        "layer_norm", {&x, &gain, &shift}, out,
        [rows, D, xhat, inv_std, gvp = gain.values_ptr(), xg = x.grad_ptr(),
         gg = gain.grad_ptr(), sg = shift.grad_ptr(), og = out.grad_ptr()]() {
            const T* go = og->data();
            const T* gv = gvp->data();
            for (size_t r = 0; r < rows; ++r) {
                const T* g = go + r * D;
                const T* h = xhat->data() + r * D;
                if (xg) {
                    T m1 = T(0), m2 = T(0);
                    for (size_t d = 0; d < D; ++d) {
                        const T dh = g[d] * gv[d];
                        m1 += dh;
                        m2 += dh * h[d];
                    }
                    m1 /= T(D);
                    m2 /= T(D);
                    const T inv = (*inv_std)[r];
                    T* dx = xg->data() + r * D;
                    for (size_t d = 0; d < D; ++d)
                        dx[d] += inv * (g[d] * gv[d] - m1 - h[d] * m2);
                }
                if (gg)
                    for (size_t d = 0; d < D; ++d) (*gg)[d] += g[d] * h[d];
                if (sg)
                    for (size_t d = 0; d < D; ++d) (*sg)[d] += g[d];
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Structural ops: gradients route or accumulate to source positions.

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const size_t rank = parts[0].rank();
    if (axis >= rank) throw ShapeError("concat axis out of range");
    Shape out_shape = parts[0].shape();
    size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) throw ShapeError("concat rank mismatch");
        for (size_t i = 0; i < rank; ++i)
            if (i != axis && p.shape()[i] != out_shape[i])
                throw ShapeError("concat shapes incompatible: " +
                                 shape_str(out_shape) + " vs " +
                                 shape_str(p.shape()));
        total += p.shape()[axis];
    }
    out_shape[axis] = total;

    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= out_shape[i];
    for (size_t i = axis + 1; i < rank; ++i) inner *= out_shape[i];

    bool rec = false;
    for (const auto& p : parts)
        if (p.requires_grad()) rec = true;
    rec = rec && Tape<T>::active() != nullptr;
    Tensor<T> out(out_shape, rec);
    T* ov = out.values().data();

    size_t offset = 0;
    for (const auto& p : parts) {
        const size_t len = p.shape()[axis];
        const T* pv = p.values().data();
        for (size_t o = 0; o < outer; ++o)
            std::copy(pv + o * len * inner, pv + (o + 1) * len * inner,
                      ov + (o * total + offset) * inner);
        offset += len;
    }

    if (rec) {
        std::vector<int64_t> ids;
        std::vector<std::shared_ptr<std::vector<T>>> grads;
        std::vector<size_t> lens;
        for (const auto& p : parts) {
            ids.push_back(p.node_id());
            grads.push_back(p.grad_ptr());
            lens.push_back(p.shape()[axis]);
        }
        typename Tape<T>::Op op;
        op.name = "concat";
        op.inputs = ids;
        op.output = out.node_id();
        op.out_grad = out.grad_ptr();
        op.backward = [outer, inner, total, grads, lens,
                       og = out.grad_ptr()]() {
            const T* go = og->data();
            size_t offset = 0;
            for (size_t pi = 0; pi < grads.size(); ++pi) {
                const size_t len = lens[pi];
                if (grads[pi]) {
                    T* dp = grads[pi]->data();
                    for (size_t o = 0; o < outer; ++o) {
                        const T* src = go + (o * total + offset) * inner;
                        T* dst = dp + o * len * inner;
                        for (size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                    }
                }
                offset += len;
            }
        };
        Tape<T>::active()->record(std::move(op));
    }
    return out;
}

template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, size_t axis) {
    return concat(std::vector<Tensor<T>>{a, b}, axis);
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, size_t axis, size_t start, size_t len) {
    if (axis >= x.rank()) throw ShapeError("slice axis out of range");
    if (len == 0 || start + len > x.shape()[axis])
        throw ShapeError("slice range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for dim " +
                         std::to_string(x.shape()[axis]));
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const size_t full = x.shape()[axis];

    Tensor<T> out(out_shape, detail::should_record<T>({&x}));
    const T* xv = x.values().data();
    T* ov = out.values().data();
    for (size_t o = 0; o < outer; ++o)
        std::copy(xv + (o * full + start) * inner,
                  xv + (o * full + start + len) * inner, ov + o * len * inner);

    detail::record<T>("slice", {&x}, out,
                      [outer, inner, full, start, len, xg = x.grad_ptr(),
                       og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T* go = og->data();
                          T* dx = xg->data();
                          for (size_t o = 0; o < outer; ++o) {
                              const T* src = go + o * len * inner;
                              T* dst = dx + (o * full + start) * inner;
                              for (size_t i = 0; i < len * inner; ++i)
                                  dst[i] += src[i];
                          }
                      });
    return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& x, const std::vector<size_t>& perm) {
    const size_t rank = x.rank();
    if (perm.size() != rank) throw ShapeError("transpose permutation rank mismatch");
    std::vector<bool> seen(rank, false);
    for (size_t p : perm) {
        if (p >= rank || seen[p]) throw ShapeError("invalid transpose permutation");
        seen[p] = true;
    }
    Shape out_shape(rank);
    for (size_t i = 0; i < rank; ++i) out_shape[i] = x.shape()[perm[i]];

    std::vector<size_t> in_strides(rank, 1);
    for (size_t i = rank; i-- > 1;)
        in_strides[i - 1] = in_strides[i] * x.shape()[i];

    // stride of the input axis that each output axis walks
    std::vector<size_t> walk(rank);
    for (size_t i = 0; i < rank; ++i) walk[i] = in_strides[perm[i]];

    const size_t n = x.numel();
    Tensor<T> out(out_shape, detail::should_record<T>({&x}));
    const T* xv = x.values().data();
    T* ov = out.values().data();
    std::vector<size_t> idx(rank, 0);
    size_t src = 0;
    for (size_t o = 0; o < n; ++o) {
        ov[o] = xv[src];
        for (size_t a = rank; a-- > 0;) {
            idx[a]++;
            src += walk[a];
            if (idx[a] < out_shape[a]) break;
            src -= walk[a] * out_shape[a];
            idx[a] = 0;
        }
    }

    detail::record<T>("transpose", {&x}, out,
                      [n, rank, out_shape, walk, xg = x.grad_ptr(),
                       og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T* go = og->data();
                          T* dx = xg->data();
                          std::vector<size_t> idx(rank, 0);
                          size_t src = 0;
                          for (size_t o = 0; o < n; ++o) {
                              dx[src] += go[o];
                              for (size_t a = rank; a-- > 0;) {
                                  idx[a]++;
                                  src += walk[a];
                                  if (idx[a] < out_shape[a]) break;
                                  src -= walk[a] * out_shape[a];
                                  idx[a] = 0;
                              }
                          }
                      });
    return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw ShapeError("reshape from " + shape_str(x.shape()) + " to " +
                         shape_str(new_shape) + " changes element count");
    Tensor<T> out(new_shape, detail::should_record<T>({&x}));
    std::copy(x.values().begin(), x.values().end(), out.values().begin());
    detail::record<T>("reshape", {&x}, out,
                      [n = x.numel(), xg = x.grad_ptr(), og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T* go = og->data();
                          T* dx = xg->data();
                          for (size_t i = 0; i < n; ++i) dx[i] += go[i];
                      });
    return out;
}

namespace detail {

template <class T>
Tensor<T> reduce_axis(const Tensor<T>& x, size_t axis, bool mean) {
    if (axis >= x.rank()) throw ShapeError("reduction axis out of range");
    Shape out_shape;
    for (size_t i = 0; i < x.rank(); ++i)
        if (i != axis) out_shape.push_back(x.shape()[i]);
    size_t outer = 1, inner = 1;
    const size_t n = x.shape()[axis];
    for (size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];

    Tensor<T> out(out_shape, should_record<T>({&x}));
    const T* xv = x.values().data();
    T* ov = out.values().data();
    const T w = mean ? T(1) / T(n) : T(1);
    for (size_t o = 0; o < outer; ++o)
        for (size_t i = 0; i < inner; ++i) {
            T acc = T(0);
            for (size_t k = 0; k < n; ++k) acc += xv[(o * n + k) * inner + i];
            ov[o * inner + i] = acc * w;
        }
    record<T>(mean ? "mean" : "sum", {&x}, out,
              [outer, inner, n, w, xg = x.grad_ptr(), og = out.grad_ptr()]() {
                  if (!xg) return;
                  const T* go = og->data();
                  T* dx = xg->data();
                  for (size_t o = 0; o < outer; ++o)
                      for (size_t i = 0; i < inner; ++i) {
                          const T g = go[o * inner + i] * w;
                          for (size_t k = 0; k < n; ++k)
                              dx[(o * n + k) * inner + i] += g;
                      }
              });
    return out;
}

}  // namespace detail

template <class T>
Tensor<T> sum_axis(const Tensor<T>& x, size_t axis) {
    return detail::reduce_axis(x, axis, false);
}

template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, size_t axis) {
    return detail::reduce_axis(x, axis, true);
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> out(Shape{}, detail::should_record<T>({&x}));
    T acc = T(0);
    for (const T v : x.values()) acc += v;
    out.values()[0] = acc;
    detail::record<T>("sum_all", {&x}, out,
                      [n = x.numel(), xg = x.grad_ptr(), og = out.grad_ptr()]() {
                          if (!xg) return;
                          const T g = (*og)[0];
                          T* dx = xg->data();
                          for (size_t i = 0; i < n; ++i) dx[i] += g;
                      });
    return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------
// Mean binary cross-entropy with logits, in the stable log-sum-exp form.
// No gradient flows to the targets.

template <class T>
Tensor<T> bce_with_logits_mean(const Tensor<T>& logits, const Tensor<T>& targets) {
    if (logits.shape() != targets.shape())
        throw ShapeError("bce targets shape " + shape_str(targets.shape()) +
                         " does not match logits " + shape_str(logits.shape()));
    const size_t n = logits.numel();
    Tensor<T> out(Shape{}, detail::should_record<T>({&logits}));
    const T* zv = logits.values().data();
    const T* tv = targets.values().data();
    T acc = T(0);
    for (size_t i = 0; i < n; ++i) {
        const T z = zv[i];
        acc += std::max(z, T(0)) - z * tv[i] + std::log1p(std::exp(-std::abs(z)));
    }
    out.values()[0] = acc / T(n);
    detail::record<T>(
        "bce_with_logits", {&logits}, out,
        [n, zvp = logits.values_ptr(), tvp = targets.values_ptr(),
         zg = logits.grad_ptr(), og = out.grad_ptr()]() {
            if (!zg) return;
            const T g = (*og)[0] / T(n);
            const T* zv = zvp->data();
            const T* tv = tvp->data();
            T* dz = zg->data();
            for (size_t i = 0; i < n; ++i) {
                const T s = T(1) / (T(1) + std::exp(-zv[i]));
                dz[i] += g * (s - tv[i]);
            }
        });
    return out;
}

}  // namespace ecgformer
