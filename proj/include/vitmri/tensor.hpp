#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vitmri {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// Dense row-major tensor. The empty shape is a scalar holding one element.
template <typename T>
class Tensor {
public:
    Tensor() : shape_{}, data_(1, T{}) {}

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), T{}) {}

    Tensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw std::invalid_argument("Tensor: data size " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(T v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    static Tensor full(Shape shape, T v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T item() const {
        if (numel() != 1)
            throw std::logic_error("Tensor::item: tensor has " + std::to_string(numel()) +
                                   " elements");
        return data_[0];
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != numel())
            throw std::invalid_argument("Tensor::reshaped: element count mismatch " +
                                        shape_str(shape_) + " -> " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

namespace detail {

// Batch layout of a tensor interpreted as a stack of matrices.
struct MatView {
    std::size_t batch;  // product of leading dims
    std::size_t rows;
    std::size_t cols;
};

inline MatView mat_view(const Shape& s) {
    if (s.size() < 2) throw std::invalid_argument("matmul operand must have rank >= 2");
    MatView v;
    v.rows = s[s.size() - 2];
    v.cols = s[s.size() - 1];
    v.batch = 1;
    for (std::size_t i = 0; i + 2 < s.size(); ++i) v.batch *= s[i];
    return v;
}

}  // namespace detail

// c += op(a) x op(b) where op transposes the trailing two axes when requested.
// Leading (batch) dims of a, b and c must be equal or singular; a singular
// batch is broadcast, and a singular output batch accumulates over the batch
// loop (used for gradients of broadcast operands).
template <typename T>
void bmm_acc(const Tensor<T>& a, bool ta, const Tensor<T>& b, bool tb, Tensor<T>& c) {
    const auto av = detail::mat_view(a.shape());
    const auto bv = detail::mat_view(b.shape());
    const auto cv = detail::mat_view(c.shape());

    const std::size_t m = ta ? av.cols : av.rows;
    const std::size_t k = ta ? av.rows : av.cols;
    const std::size_t kb = tb ? bv.cols : bv.rows;
    const std::size_t n = tb ? bv.rows : bv.cols;
    if (k != kb)
        throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                    (ta ? "^T" : "") + " x " + shape_str(b.shape()) +
                                    (tb ? "^T" : ""));
    if (cv.rows != m || cv.cols != n)
        throw std::invalid_argument("matmul: output shape mismatch");

    const std::size_t batch = std::max(av.batch, bv.batch);
    if ((av.batch != batch && av.batch != 1) || (bv.batch != batch && bv.batch != 1) ||
        (cv.batch != batch && cv.batch != 1))
        throw std::invalid_argument("matmul: batch dimensions not broadcastable");

    const std::size_t a_step = av.rows * av.cols;
    const std::size_t b_step = bv.rows * bv.cols;
    const std::size_t c_step = cv.rows * cv.cols;

    for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* pa = a.data() + (av.batch == 1 ? 0 : bi * a_step);
        const T* pb = b.data() + (bv.batch == 1 ? 0 : bi * b_step);
        T* pc = c.data() + (cv.batch == 1 ? 0 : bi * c_step);

        if (!ta && !tb) {
            for (std::size_t i = 0; i < m; ++i) {
                const T* arow = pa + i * k;
                T* crow = pc + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const T aip = arow[p];
                    if (aip == T{}) continue;
                    const T* brow = pb + p * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
                }
            }
        } else if (!ta && tb) {
            for (std::size_t i = 0; i < m; ++i) {
                const T* arow = pa + i * k;
                T* crow = pc + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    const T* brow = pb + j * k;
                    T acc{};
                    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                    crow[j] += acc;
                }
            }
        } else if (ta && !tb) {
            for (std::size_t p = 0; p < k; ++p) {
                const T* arow = pa + p * m;
                const T* brow = pb + p * n;
                for (std::size_t i = 0; i < m; ++i) {
                    const T api = arow[i];
                    if (api == T{}) continue;
                    T* crow = pc + i * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
                }
            }
        } else {
            for (std::size_t p = 0; p < k; ++p) {
                const T* arow = pa + p * m;
                for (std::size_t j = 0; j < n; ++j) {
                    const T bjp = pb[j * k + p];
                    if (bjp == T{}) continue;
                    for (std::size_t i = 0; i < m; ++i) pc[i * n + j] += arow[i] * bjp;
                }
            }
        }
    }
}

// Batched matrix product with broadcasting as in bmm_acc.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, bool ta, const Tensor<T>& b, bool tb) {
    const auto av = detail::mat_view(a.shape());
    const auto bv = detail::mat_view(b.shape());
    const std::size_t m = ta ? av.cols : av.rows;
    const std::size_t n = tb ? bv.rows : bv.cols;

    Shape out_shape;
    // Prefer the operand with the larger batch; on ties (both 1) keep the
    // higher-rank side so an explicit leading batch dimension survives.
    const Shape& batch_src = (av.batch != bv.batch)
                                 ? (av.batch > bv.batch ? a.shape() : b.shape())
                                 : (a.rank() >= b.rank() ? a.shape() : b.shape());
    out_shape.assign(batch_src.begin(), batch_src.end() - 2);
    out_shape.push_back(m);
    out_shape.push_back(n);

    Tensor<T> c(std::move(out_shape));
    bmm_acc(a, ta, b, tb, c);
    return c;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    return bmm(a, false, b, false);
}

// Axis permutation of a row-major tensor.
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
    const std::size_t r = x.rank();
    if (axes.size() != r) throw std::invalid_argument("permute: axes rank mismatch");
    std::vector<bool> seen(r, false);
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (axes[i] >= r || seen[axes[i]]) throw std::invalid_argument("permute: invalid axes");
        seen[axes[i]] = true;
        out_shape[i] = x.dim(axes[i]);
    }

    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.dim(i);
    std::vector<std::size_t> gather_strides(r);
    for (std::size_t i = 0; i < r; ++i) gather_strides[i] = in_strides[axes[i]];

    Tensor<T> out(out_shape);
    std::vector<std::size_t> idx(r, 0);
    const std::size_t n = x.numel();
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        out[o] = x[src];
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            src += gather_strides[d];
            if (idx[d] < out_shape[d]) break;
            src -= idx[d] * gather_strides[d];
            idx[d] = 0;
        }
    }
    return out;
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& axes) {
    std::vector<std::size_t> inv(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = i;
    return inv;
}

namespace detail {

// Decomposes a shape around `axis` into (outer, length, inner) extents.
struct AxisView {
    std::size_t outer, len, inner;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
    if (axis >= s.size()) throw std::invalid_argument("axis out of range for " + shape_str(s));
    AxisView v{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

}  // namespace detail

// Numerically stable softmax along `axis` (max-subtracted).
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    const auto v = detail::axis_view(x.shape(), axis);
    Tensor<T> out(x.shape());
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.len * v.inner + in;
            T mx = x[base];
            for (std::size_t j = 1; j < v.len; ++j)
                mx = std::max(mx, x[base + j * v.inner]);
            T sum{};
            for (std::size_t j = 0; j < v.len; ++j) {
                const T e = std::exp(x[base + j * v.inner] - mx);
                out[base + j * v.inner] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < v.len; ++j) out[base + j * v.inner] /= sum;
        }
    }
    return out;
}

// log(softmax(x)) along `axis`, max-subtracted so saturated inputs stay finite.
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, std::size_t axis) {
    const auto v = detail::axis_view(x.shape(), axis);
    Tensor<T> out(x.shape());
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.len * v.inner + in;
            T mx = x[base];
            for (std::size_t j = 1; j < v.len; ++j)
                mx = std::max(mx, x[base + j * v.inner]);
            T sum{};
            for (std::size_t j = 0; j < v.len; ++j)
                sum += std::exp(x[base + j * v.inner] - mx);
            const T lse = mx + std::log(sum);
            for (std::size_t j = 0; j < v.len; ++j)
                out[base + j * v.inner] = x[base + j * v.inner] - lse;
        }
    }
    return out;
}

}  // namespace vitmri
