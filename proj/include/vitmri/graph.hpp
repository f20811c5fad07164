#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitmri/rng.hpp"
#include "vitmri/tensor.hpp"

namespace vitmri {

// Reverse-mode autodiff tape. A graph is built per forward pass; backward()
// walks the tape in reverse. Parameters are referenced by pointer and must
// outlive the graph. Every node value is checked for NaN/Inf on creation,
// and every gradient on accumulation, so divergence surfaces at the op that
// produced it.
template <typename T>
class Graph {
public:
    using Id = std::int32_t;

    enum class Op {
        Constant,
        Param,
        MatMul,
        Add,
        Mul,
        Scale,
        Softmax,
        LogSoftmax,
        LayerNorm,
        Gelu,
        Reshape,
        Transpose,
        Dropout,
        ReduceMean,
    };

    Id constant(Tensor<T> v) {
        Node n;
        n.op = Op::Constant;
        n.value = std::move(v);
        n.needs_grad = false;
        return push(std::move(n), "constant");
    }

    Id param(const Tensor<T>* p) {
        if (p == nullptr) throw std::invalid_argument("Graph::param: null tensor");
        Node n;
        n.op = Op::Param;
        n.value = *p;
        n.needs_grad = true;
        return push(std::move(n), "param");
    }

    // c = op(a) x op(b), trailing two axes transposed when ta/tb is set.
    Id matmul(Id a, Id b, bool ta = false, bool tb = false) {
        Node n;
        n.op = Op::MatMul;
        n.a = a;
        n.b = b;
        n.ta = ta;
        n.tb = tb;
        n.value = bmm(value(a), ta, value(b), tb);
        n.needs_grad = needs(a) || needs(b);
        return push(std::move(n), "matmul");
    }

    // a + b where b's shape is a suffix of a's shape (broadcast over the rest).
    Id add(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        check_suffix(av.shape(), bv.shape(), "add");
        Node n;
        n.op = Op::Add;
        n.a = a;
        n.b = b;
        Tensor<T> out = av;
        const std::size_t nb = bv.numel();
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i % nb];
        n.value = std::move(out);
        n.needs_grad = needs(a) || needs(b);
        return push(std::move(n), "add");
    }

    // Elementwise product of same-shape tensors.
    Id mul(Id a, Id b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (!av.same_shape(bv))
            throw std::invalid_argument("Graph::mul: shape mismatch " + shape_str(av.shape()) +
                                        " vs " + shape_str(bv.shape()));
        Node n;
        n.op = Op::Mul;
        n.a = a;
        n.b = b;
        Tensor<T> out = av;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
        n.value = std::move(out);
        n.needs_grad = needs(a) || needs(b);
        return push(std::move(n), "mul");
    }

    Id scale(Id a, T s) {
        Node n;
        n.op = Op::Scale;
        n.a = a;
        n.sc = s;
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
        n.value = std::move(out);
        n.needs_grad = needs(a);
        return push(std::move(n), "scale");
    }

    Id softmax(Id a, std::size_t axis) {
        Node n;
        n.op = Op::Softmax;
        n.a = a;
        n.axis = axis;
        n.value = vitmri::softmax(value(a), axis);
        n.needs_grad = needs(a);
        return push(std::move(n), "softmax");
    }

    Id log_softmax(Id a, std::size_t axis) {
        Node n;
        n.op = Op::LogSoftmax;
        n.a = a;
        n.axis = axis;
        n.value = vitmri::log_softmax(value(a), axis);
        n.needs_grad = needs(a);
        return push(std::move(n), "log_softmax");
    }

    // Normalization over the last axis: y = gamma * (x - mean) / sqrt(var + eps) + beta.
    Id layer_norm(Id x, Id gamma, Id beta, T eps) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& gv = value(gamma);
        const Tensor<T>& bv = value(beta);
        if (xv.rank() < 1) throw std::invalid_argument("layer_norm: rank-0 input");
        const std::size_t d = xv.dim(xv.rank() - 1);
        if (gv.shape() != Shape{d} || bv.shape() != Shape{d})
            throw std::invalid_argument("layer_norm: gamma/beta must have shape [" +
                                        std::to_string(d) + "]");
        const std::size_t rows = xv.numel() / d;

        Node n;
        n.op = Op::LayerNorm;
        n.a = x;
        n.b = gamma;
        n.c = beta;
        Tensor<T> xhat(xv.shape());
        Tensor<T> inv_std(Shape{rows});
        Tensor<T> out(xv.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            const T* px = xv.data() + r * d;
            T mean{};
            for (std::size_t j = 0; j < d; ++j) mean += px[j];
            mean /= static_cast<T>(d);
            T var{};
            for (std::size_t j = 0; j < d; ++j) {
                const T c = px[j] - mean;
                var += c * c;
            }
            var /= static_cast<T>(d);
            const T is = T(1) / std::sqrt(var + eps);
            inv_std[r] = is;
            for (std::size_t j = 0; j < d; ++j) {
                const T h = (px[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = gv[j] * h + bv[j];
            }
        }
        n.value = std::move(out);
        n.saved.push_back(std::move(xhat));
        n.saved.push_back(std::move(inv_std));
        n.needs_grad = needs(x) || needs(gamma) || needs(beta);
        return push(std::move(n), "layer_norm");
    }

    // Exact GELU: x * Phi(x) with Phi the standard normal CDF.
    Id gelu(Id a) {
        Node n;
        n.op = Op::Gelu;
        n.a = a;
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double x = static_cast<double>(out[i]);
            out[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2)));
        }
        n.value = std::move(out);
        n.needs_grad = needs(a);
        return push(std::move(n), "gelu");
    }

    Id reshape(Id a, Shape shape) {
        Node n;
        n.op = Op::Reshape;
        n.a = a;
        n.value = value(a).reshaped(std::move(shape));
        n.needs_grad = needs(a);
        return push(std::move(n), "reshape");
    }

    Id transpose(Id a, std::vector<std::size_t> perm) {
        Node n;
        n.op = Op::Transpose;
        n.a = a;
        n.value = permute(value(a), perm);
        n.perm = std::move(perm);
        n.needs_grad = needs(a);
        return push(std::move(n), "transpose");
    }

    // Inverted dropout; identity when not training or p == 0 (rng may then
    // be null).
    Id dropout(Id a, double p, bool training, RngStream* rng) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
        Node n;
        n.op = Op::Dropout;
        n.a = a;
        Tensor<T> out = value(a);
        if (training && p > 0.0) {
            if (rng == nullptr) throw std::invalid_argument("dropout: rng required in training");
            Tensor<T> mask(out.shape());
            const T keep_inv = static_cast<T>(1.0 / (1.0 - p));
            for (std::size_t i = 0; i < out.numel(); ++i) {
                mask[i] = rng->bernoulli(p) ? T(0) : keep_inv;
                out[i] *= mask[i];
            }
            n.saved.push_back(std::move(mask));
        }
        n.value = std::move(out);
        n.needs_grad = needs(a);
        return push(std::move(n), "dropout");
    }

    // Mean over all elements, producing a scalar.
    Id reduce_mean(Id a) {
        Node n;
        n.op = Op::ReduceMean;
        n.a = a;
        const Tensor<T>& av = value(a);
        T acc{};
        for (std::size_t i = 0; i < av.numel(); ++i) acc += av[i];
        n.value = Tensor<T>::scalar(acc / static_cast<T>(av.numel()));
        n.needs_grad = needs(a);
        return push(std::move(n), "reduce_mean");
    }

    const Tensor<T>& value(Id id) const { return nodes_.at(check_id(id)).value; }

    // Gradient of the last backward() target w.r.t. node `id`.
    const Tensor<T>& grad(Id id) const {
        const Node& n = nodes_.at(check_id(id));
        if (!n.grad_set)
            throw std::logic_error("Graph::grad: no gradient recorded for node " +
                                   std::to_string(id));
        return n.grad;
    }

    bool has_grad(Id id) const { return nodes_.at(check_id(id)).grad_set; }

    std::size_t size() const { return nodes_.size(); }

    void backward(Id loss) {
        Node& ln = nodes_.at(check_id(loss));
        if (ln.value.numel() != 1)
            throw std::logic_error("Graph::backward: target must be a scalar, got shape " +
                                   shape_str(ln.value.shape()));
        for (Node& n : nodes_) n.grad_set = false;
        ln.grad = Tensor<T>::full(ln.value.shape(), T(1));
        ln.grad_set = true;

        for (Id i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.grad_set || !n.needs_grad) continue;
            if (!n.grad.all_finite())
                throw std::runtime_error("Graph::backward: non-finite gradient at " +
                                         op_name(n.op) + " node " + std::to_string(i));
            propagate(n);
        }
    }

private:
    struct Node {
        Op op{};
        Id a = -1, b = -1, c = -1;
        Tensor<T> value;
        Tensor<T> grad;
        bool grad_set = false;
        bool needs_grad = false;
        bool ta = false, tb = false;
        std::size_t axis = 0;
        T sc{};
        std::vector<std::size_t> perm;
        std::vector<Tensor<T>> saved;
    };

    std::vector<Node> nodes_;

    static std::string op_name(Op op) {
        switch (op) {
            case Op::Constant: return "constant";
            case Op::Param: return "param";
            case Op::MatMul: return "matmul";
            case Op::Add: return "add";
            case Op::Mul: return "mul";
            case Op::Scale: return "scale";
            case Op::Softmax: return "softmax";
            case Op::LogSoftmax: return "log_softmax";
            case Op::LayerNorm: return "layer_norm";
            case Op::Gelu: return "gelu";
            case Op::Reshape: return "reshape";
            case Op::Transpose: return "transpose";
            case Op::Dropout: return "dropout";
            case Op::ReduceMean: return "reduce_mean";
        }
        return "?";
    }

    std::size_t check_id(Id id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw std::out_of_range("Graph: invalid node id " + std::to_string(id));
        return static_cast<std::size_t>(id);
    }

    bool needs(Id id) const { return nodes_.at(check_id(id)).needs_grad; }

    Id push(Node&& n, const char* what) {
        if (!n.value.all_finite())
            throw std::runtime_error(std::string("Graph: non-finite value produced by ") + what +
                                     " node " + std::to_string(nodes_.size()));
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    static void check_suffix(const Shape& a, const Shape& b, const char* what) {
        if (b.size() > a.size())
            throw std::invalid_argument(std::string("Graph::") + what + ": rank of " +
                                        shape_str(b) + " exceeds " + shape_str(a));
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b[b.size() - 1 - i] != a[a.size() - 1 - i])
                throw std::invalid_argument(std::string("Graph::") + what + ": " + shape_str(b) +
                                            " is not a trailing suffix of " + shape_str(a));
    }

    void accumulate(Id target, const Tensor<T>& g) {
        Node& n = nodes_[check_id(target)];
        if (!n.needs_grad) return;
        if (!n.grad_set) {
            n.grad = Tensor<T>(n.value.shape());
            n.grad_set = true;
        }
        if (!n.grad.same_shape(g)) throw std::logic_error("Graph: gradient shape mismatch");
        for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
    }

    Tensor<T>& grad_buffer(Id target) {
        Node& n = nodes_[check_id(target)];
        if (!n.grad_set) {
            n.grad = Tensor<T>(n.value.shape());
            n.grad_set = true;
        }
        return n.grad;
    }

    void propagate(Node& n) {
        const Tensor<T>& g = n.grad;
        switch (n.op) {
            case Op::Constant:
            case Op::Param:
                break;
            case Op::MatMul: {
                const Tensor<T>& av = value(n.a);
                const Tensor<T>& bv = value(n.b);
                if (needs(n.a)) {
                    Tensor<T>& ga = grad_buffer(n.a);
                    if (!n.ta)
                        bmm_acc(g, false, bv, !n.tb, ga);
                    else
                        bmm_acc(bv, n.tb, g, true, ga);
                }
                if (needs(n.b)) {
                    Tensor<T>& gb = grad_buffer(n.b);
                    if (!n.tb)
                        bmm_acc(av, !n.ta, g, false, gb);
                    else
                        bmm_acc(g, true, av, n.ta, gb);
                }
                break;
            }
            case Op::Add: {
                if (needs(n.a)) accumulate(n.a, g);
                if (needs(n.b)) {
                    Tensor<T>& gb = grad_buffer(n.b);
                    const std::size_t nb = gb.numel();
                    for (std::size_t i = 0; i < g.numel(); ++i) gb[i % nb] += g[i];
                }
                break;
            }
            case Op::Mul: {
                if (needs(n.a)) {
                    Tensor<T>& ga = grad_buffer(n.a);
                    const Tensor<T>& bv = value(n.b);
                    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
                }
                if (needs(n.b)) {
                    Tensor<T>& gb = grad_buffer(n.b);
                    const Tensor<T>& av = value(n.a);
                    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
                }
                break;
            }
            case Op::Scale: {
                Tensor<T>& ga = grad_buffer(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.sc;
                break;
            }
            case Op::Softmax: {
                // dx = y * (g - sum(g * y)) along the softmax axis.
                const Tensor<T>& y = n.value;
                const auto v = detail::axis_view(y.shape(), n.axis);
                Tensor<T>& ga = grad_buffer(n.a);
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t in = 0; in < v.inner; ++in) {
                        const std::size_t base = o * v.len * v.inner + in;
                        T dot{};
                        for (std::size_t j = 0; j < v.len; ++j) {
                            const std::size_t k = base + j * v.inner;
                            dot += g[k] * y[k];
                        }
                        for (std::size_t j = 0; j < v.len; ++j) {
                            const std::size_t k = base + j * v.inner;
                            ga[k] += y[k] * (g[k] - dot);
                        }
                    }
                break;
            }
            case Op::LogSoftmax: {
                // dx = g - softmax(x) * sum(g) along the axis; softmax = exp(value).
                const Tensor<T>& y = n.value;
                const auto v = detail::axis_view(y.shape(), n.axis);
                Tensor<T>& ga = grad_buffer(n.a);
                for (std::size_t o = 0; o < v.outer; ++o)
                    for (std::size_t in = 0; in < v.inner; ++in) {
                        const std::size_t base = o * v.len * v.inner + in;
                        T gsum{};
                        for (std::size_t j = 0; j < v.len; ++j)
                            gsum += g[base + j * v.inner];
                        for (std::size_t j = 0; j < v.len; ++j) {
                            const std::size_t k = base + j * v.inner;
                            ga[k] += g[k] - std::exp(y[k]) * gsum;
                        }
                    }
                break;
            }
            case Op::LayerNorm: {
                const Tensor<T>& xhat = n.saved[0];
                const Tensor<T>& inv_std = n.saved[1];
                const Tensor<T>& gv = value(n.b);
                const std::size_t d = gv.numel();
                const std::size_t rows = xhat.numel() / d;
                if (needs(n.b)) {
                    Tensor<T>& gg = grad_buffer(n.b);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j)
                            gg[j] += g[r * d + j] * xhat[r * d + j];
                }
                if (needs(n.c)) {
                    Tensor<T>& gb = grad_buffer(n.c);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
                }
                if (needs(n.a)) {
                    Tensor<T>& gx = grad_buffer(n.a);
                    for (std::size_t r = 0; r < rows; ++r) {
                        T m1{}, m2{};
                        for (std::size_t j = 0; j < d; ++j) {
                            const T gy = g[r * d + j] * gv[j];
                            m1 += gy;
                            m2 += gy * xhat[r * d + j];
                        }
                        m1 /= static_cast<T>(d);
                        m2 /= static_cast<T>(d);
                        for (std::size_t j = 0; j < d; ++j) {
                            const T gy = g[r * d + j] * gv[j];
                            gx[r * d + j] += inv_std[r] * (gy - m1 - xhat[r * d + j] * m2);
                        }
                    }
                }
                break;
            }
            case Op::Gelu: {
                const Tensor<T>& xv = value(n.a);
                Tensor<T>& ga = grad_buffer(n.a);
                constexpr double inv_sqrt_2pi = 0.3989422804014327;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    const double x = static_cast<double>(xv[i]);
                    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
                    ga[i] += g[i] * static_cast<T>(cdf + x * pdf);
                }
                break;
            }
            case Op::Reshape: {
                Tensor<T>& ga = grad_buffer(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                break;
            }
            case Op::Transpose: {
                accumulate(n.a, permute(g, inverse_permutation(n.perm)));
                break;
            }
            case Op::Dropout: {
                if (n.saved.empty()) {
                    accumulate(n.a, g);
                } else {
                    const Tensor<T>& mask = n.saved[0];
                    Tensor<T>& ga = grad_buffer(n.a);
                    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * mask[i];
                }
                break;
            }
            case Op::ReduceMean: {
                Tensor<T>& ga = grad_buffer(n.a);
                const T s = g[0] / static_cast<T>(ga.numel());
                for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += s;
                break;
            }
        }
    }
};

// Central-difference gradient of `f` w.r.t. `x`, step h per coordinate.
template <typename F>
Tensor<double> finite_difference_grad(F&& f, Tensor<double> x, double h = 1e-5) {
    Tensor<double> g(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace vitmri
