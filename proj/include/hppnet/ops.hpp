#ifndef HPPNET_OPS_HPP
#define HPPNET_OPS_HPP

#include "hppnet/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>

namespace hppnet {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "add");
    auto n = detail::make_result<S>(a.shape(), {a, b});
    const S* pa = a.data();
    const S* pb = b.data();
    for (int64_t i = 0; i < n->size(); ++i) n->value[i] = pa[i] + pb[i];
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            for (int k = 0; k < 2; ++k) {
                auto& p = *self.parents[k];
                if (!p.requires_grad) continue;
                p.ensure_grad();
                for (int64_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i];
            }
        };
    }
    return Tensor<S>(n);
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "sub");
    auto n = detail::make_result<S>(a.shape(), {a, b});
    for (int64_t i = 0; i < n->size(); ++i) n->value[i] = a.data()[i] - b.data()[i];
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (int64_t i = 0; i < self.size(); ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int64_t i = 0; i < self.size(); ++i) pb.grad[i] -= self.grad[i];
            }
        };
    }
    return Tensor<S>(n);
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "mul");
    auto n = detail::make_result<S>(a.shape(), {a, b});
    for (int64_t i = 0; i < n->size(); ++i) n->value[i] = a.data()[i] * b.data()[i];
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (int64_t i = 0; i < self.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int64_t i = 0; i < self.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
            }
        };
    }
    return Tensor<S>(n);
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    auto n = detail::make_result<S>(a.shape(), {a});
    for (int64_t i = 0; i < n->size(); ++i) n->value[i] = a.data()[i] * c;
    if (n->requires_grad) {
        n->backward_fn = [c](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (int64_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i] * c;
        };
    }
    return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

enum class Activation { Relu, Sigmoid, Tanh };

template <typename S>
Tensor<S> elementwise(const Tensor<S>& a, Activation fn) {
    auto n = detail::make_result<S>(a.shape(), {a});
    const S* in = a.data();
    switch (fn) {
    case Activation::Relu:
        for (int64_t i = 0; i < n->size(); ++i) n->value[i] = in[i] > S(0) ? in[i] : S(0);
        break;
    case Activation::Sigmoid:
        for (int64_t i = 0; i < n->size(); ++i) n->value[i] = S(1) / (S(1) + std::exp(-in[i]));
        break;
    case Activation::Tanh:
        for (int64_t i = 0; i < n->size(); ++i) n->value[i] = std::tanh(in[i]);
        break;
    }
    if (n->requires_grad) {
        n->backward_fn = [fn](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            switch (fn) {
            case Activation::Relu:
                for (int64_t i = 0; i < self.size(); ++i)
                    if (p.value[i] > S(0)) p.grad[i] += self.grad[i];
                break;
            case Activation::Sigmoid:
                for (int64_t i = 0; i < self.size(); ++i) {
                    const S y = self.value[i];
                    p.grad[i] += self.grad[i] * y * (S(1) - y);
                }
                break;
            case Activation::Tanh:
                for (int64_t i = 0; i < self.size(); ++i) {
                    const S y = self.value[i];
                    p.grad[i] += self.grad[i] * (S(1) - y * y);
                }
                break;
            }
        };
    }
    return Tensor<S>(n);
}

template <typename S> Tensor<S> relu(const Tensor<S>& a) { return elementwise(a, Activation::Relu); }
template <typename S> Tensor<S> sigmoid(const Tensor<S>& a) { return elementwise(a, Activation::Sigmoid); }
template <typename S> Tensor<S> tanh_op(const Tensor<S>& a) { return elementwise(a, Activation::Tanh); }

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    auto n = detail::make_result<S>(std::move(shape), {a});
    n->value = a.node()->value;
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (int64_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return Tensor<S>(n);
}

namespace detail {

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

// index map for permute: out[i] = in[perm_index(i)]
inline std::vector<int64_t> permute_index_map(const Shape& in_shape, const std::vector<int>& dims) {
    Shape out_shape(dims.size());
    for (size_t i = 0; i < dims.size(); ++i) out_shape[i] = in_shape[dims[i]];
    auto in_st = row_major_strides(in_shape);
    auto out_st = row_major_strides(out_shape);
    std::vector<int64_t> map(shape_size(out_shape));
    const int64_t n = static_cast<int64_t>(map.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        int64_t rem = i, src = 0;
        for (size_t d = 0; d < dims.size(); ++d) {
            const int64_t idx = rem / out_st[d];
            rem -= idx * out_st[d];
            src += idx * in_st[dims[d]];
        }
        map[i] = src;
    }
    return map;
}

} // namespace detail

template <typename S>
Tensor<S> permute(const Tensor<S>& a, std::vector<int> dims) {
    if (dims.size() != a.rank())
        throw DimensionError("permute: axis list has wrong length for " + shape_str(a.shape()));
    Shape out_shape(dims.size());
    for (size_t i = 0; i < dims.size(); ++i) out_shape[i] = a.shape()[dims[i]];
    auto map = detail::permute_index_map(a.shape(), dims);
    auto n = detail::make_result<S>(out_shape, {a});
    const S* in = a.data();
    const int64_t sz = n->size();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < sz; ++i) n->value[i] = in[map[i]];
    if (n->requires_grad) {
        n->backward_fn = [map = std::move(map)](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (int64_t i = 0; i < self.size(); ++i) p.grad[map[i]] += self.grad[i];
        };
    }
    return Tensor<S>(n);
}

// Concatenate along axis 1 of 4-d tensors (channel axis for [B,C,T,F] maps).
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 4 || b.rank() != 4)
        throw DimensionError("concat_channels expects rank-4 tensors");
    for (int d : {0, 2, 3})
        if (a.shape()[d] != b.shape()[d])
            throw DimensionError("concat_channels: axis " + std::to_string(d) + " differs: " +
                                 shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), inner = a.dim(2) * a.dim(3);
    auto n = detail::make_result<S>({B, Ca + Cb, a.dim(2), a.dim(3)}, {a, b});
    for (int64_t bi = 0; bi < B; ++bi) {
        std::copy_n(a.data() + bi * Ca * inner, Ca * inner, n->value.data() + bi * (Ca + Cb) * inner);
        std::copy_n(b.data() + bi * Cb * inner, Cb * inner,
                    n->value.data() + bi * (Ca + Cb) * inner + Ca * inner);
    }
    if (n->requires_grad) {
        n->backward_fn = [B, Ca, Cb, inner](Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) pa.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            for (int64_t bi = 0; bi < B; ++bi) {
                const S* g = self.grad.data() + bi * (Ca + Cb) * inner;
                if (pa.requires_grad)
                    for (int64_t i = 0; i < Ca * inner; ++i) pa.grad[bi * Ca * inner + i] += g[i];
                if (pb.requires_grad)
                    for (int64_t i = 0; i < Cb * inner; ++i) pb.grad[bi * Cb * inner + i] += g[Ca * inner + i];
            }
        };
    }
    return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// Reductions

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
    auto n = detail::make_result<S>({1}, {a});
    S acc = 0;
    for (int64_t i = 0; i < a.size(); ++i) acc += a.data()[i];
    n->value[0] = acc;
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            const S g = self.grad[0];
            for (auto& v : p.grad) v += g;
        };
    }
    return Tensor<S>(n);
}

// ---------------------------------------------------------------------------
// Dense linear algebra

// [M,K] x [K,N] -> [M,N]
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    auto n = detail::make_result<S>({M, N}, {a, b});
    ConstMatMap<S> A(a.data(), M, K), B(b.data(), K, N);
    MatMap<S>(n->value.data(), M, N).noalias() = A * B;
    if (n->requires_grad) {
        n->backward_fn = [M, K, N](Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            ConstMatMap<S> G(self.grad.data(), M, N);
            ConstMatMap<S> A(pa.value.data(), M, K), B(pb.value.data(), K, N);
            if (pa.requires_grad) {
                pa.ensure_grad();
                MatMap<S>(pa.grad.data(), M, K).noalias() += G * B.transpose();
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                MatMap<S>(pb.grad.data(), K, N).noalias() += A.transpose() * G;
            }
        };
    }
    return Tensor<S>(n);
}

// x:[M,N] + row vector bias:[N]
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& bias) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
        throw DimensionError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
    const int64_t M = x.dim(0), N = x.dim(1);
    auto n = detail::make_result<S>(x.shape(), {x, bias});
    for (int64_t r = 0; r < M; ++r)
        for (int64_t c = 0; c < N; ++c) n->value[r * N + c] = x.data()[r * N + c] + bias.data()[c];
    if (n->requires_grad) {
        n->backward_fn = [M, N](Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pb = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                for (int64_t i = 0; i < M * N; ++i) px.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int64_t r = 0; r < M; ++r)
                    for (int64_t c = 0; c < N; ++c) pb.grad[c] += self.grad[r * N + c];
            }
        };
    }
    return Tensor<S>(n);
}

// Affine map over the last axis: collapses leading axes, y = x.W + b.
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
    const int64_t din = x.shape().back();
    if (w.rank() != 2 || w.dim(0) != din)
        throw DimensionError("linear: weight " + shape_str(w.shape()) + " does not accept input " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape.back() = w.dim(1);
    auto flat = reshape(x, {x.size() / din, din});
    return reshape(add_rowvec(matmul(flat, w), b), std::move(out_shape));
}

// ---------------------------------------------------------------------------
// Loss primitives (scalar-valued, analytic backward)

// sum over cells of -w*y*log(p) - (1-y)*log(1-p), p clamped to [eps, 1-eps].
// Gradient is zero where the clamp is active.
template <typename S>
Tensor<S> bce_sum(const Tensor<S>& pred, const Tensor<S>& target, S pos_weight, S eps = S(1e-7)) {
    detail::check_same_shape(pred, target, "bce_sum");
    auto n = detail::make_result<S>({1}, {pred, target});
    double acc = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        const S p = std::clamp(pred.data()[i], eps, S(1) - eps);
        const S y = target.data()[i];
        acc += -double(pos_weight) * double(y) * std::log(double(p)) -
               (1.0 - double(y)) * std::log(1.0 - double(p));
    }
    n->value[0] = static_cast<S>(acc);
    if (n->requires_grad) {
        n->backward_fn = [pos_weight, eps](Node<S>& self) {
            auto& pp = *self.parents[0];
            auto& pt = *self.parents[1];
            const S g = self.grad[0];
            if (pp.requires_grad) {
                pp.ensure_grad();
                for (size_t i = 0; i < pp.value.size(); ++i) {
                    const S raw = pp.value[i];
                    if (raw < eps || raw > S(1) - eps) continue;
                    const S y = pt.value[i];
                    pp.grad[i] += g * (-pos_weight * y / raw + (S(1) - y) / (S(1) - raw));
                }
            }
        };
    }
    return Tensor<S>(n);
}

// sum over cells of mask * (target - pred)^2; mask is a constant.
template <typename S>
Tensor<S> masked_sq_sum(const Tensor<S>& pred, const Tensor<S>& target, const Tensor<S>& mask) {
    detail::check_same_shape(pred, target, "masked_sq_sum");
    detail::check_same_shape(pred, mask, "masked_sq_sum");
    auto n = detail::make_result<S>({1}, {pred, target, mask});
    double acc = 0;
    for (int64_t i = 0; i < pred.size(); ++i) {
        const double d = double(target.data()[i]) - double(pred.data()[i]);
        acc += double(mask.data()[i]) * d * d;
    }
    n->value[0] = static_cast<S>(acc);
    if (n->requires_grad) {
        n->backward_fn = [](Node<S>& self) {
            auto& pp = *self.parents[0];
            auto& pt = *self.parents[1];
            auto& pm = *self.parents[2];
            const S g = self.grad[0];
            if (pp.requires_grad) {
                pp.ensure_grad();
                for (size_t i = 0; i < pp.value.size(); ++i)
                    pp.grad[i] += g * S(-2) * pm.value[i] * (pt.value[i] - pp.value[i]);
            }
        };
    }
    return Tensor<S>(n);
}

} // namespace hppnet

#endif
