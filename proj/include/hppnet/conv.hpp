#ifndef HPPNET_CONV_HPP
#define HPPNET_CONV_HPP

#include "hppnet/ops.hpp"

namespace hppnet {

namespace detail {

// Gather one time-chunk of the padded input into a [Cin*Kt*Kf, Tc*F] patch
// matrix whose column order matches a row-major [Cout, Cin*Kt*Kf] kernel.
template <typename S>
void im2col_chunk(const S* in, int64_t Cin, int64_t T, int64_t F,
                  int64_t Kt, int64_t Kf, int64_t dt, int64_t df,
                  int64_t t0, int64_t Tc, S* cols) {
    const int64_t pad_t = (Kt - 1) * dt / 2;
    const int64_t pad_f = (Kf - 1) * df / 2;
    const int64_t rows = Cin * Kt * Kf;
    const int64_t ncol = Tc * F;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t cin = r / (Kt * Kf);
        const int64_t kt = (r / Kf) % Kt;
        const int64_t kf = r % Kf;
        S* dst = cols + r * ncol;
        const S* src_plane = in + cin * T * F;
        for (int64_t ti = 0; ti < Tc; ++ti) {
            const int64_t ts = t0 + ti - pad_t + kt * dt;
            S* row_dst = dst + ti * F;
            if (ts < 0 || ts >= T) {
                std::fill_n(row_dst, F, S(0));
                continue;
            }
            const S* src_row = src_plane + ts * F;
            const int64_t off = kf * df - pad_f; // f_src = f + off
            const int64_t f_lo = std::max<int64_t>(0, -off);
            const int64_t f_hi = std::min<int64_t>(F, F - off);
            if (f_lo > 0) std::fill_n(row_dst, f_lo, S(0));
            if (f_hi > f_lo) std::copy(src_row + f_lo + off, src_row + f_hi + off, row_dst + f_lo);
            if (f_hi < F) std::fill_n(row_dst + std::max<int64_t>(f_hi, f_lo), F - std::max<int64_t>(f_hi, f_lo), S(0));
        }
    }
}

// Scatter-add of a patch-matrix gradient back onto the input plane.
template <typename S>
void col2im_chunk(const S* cols, int64_t Cin, int64_t T, int64_t F,
                  int64_t Kt, int64_t Kf, int64_t dt, int64_t df,
                  int64_t t0, int64_t Tc, S* din) {
    const int64_t pad_t = (Kt - 1) * dt / 2;
    const int64_t pad_f = (Kf - 1) * df / 2;
    const int64_t ncol = Tc * F;
    // Parallel over input channels: rows of distinct cin write disjoint planes.
#pragma omp parallel for schedule(static)
    for (int64_t cin = 0; cin < Cin; ++cin) {
        for (int64_t kt = 0; kt < Kt; ++kt) {
            for (int64_t kf = 0; kf < Kf; ++kf) {
                const int64_t r = (cin * Kt + kt) * Kf + kf;
                const S* src = cols + r * ncol;
                S* dst_plane = din + cin * T * F;
                for (int64_t ti = 0; ti < Tc; ++ti) {
                    const int64_t ts = t0 + ti - pad_t + kt * dt;
                    if (ts < 0 || ts >= T) continue;
                    const int64_t off = kf * df - pad_f;
                    const int64_t f_lo = std::max<int64_t>(0, -off);
                    const int64_t f_hi = std::min<int64_t>(F, F - off);
                    S* dst_row = dst_plane + ts * F + off;
                    const S* src_row = src + ti * F;
                    for (int64_t f = f_lo; f < f_hi; ++f) dst_row[f] += src_row[f];
                }
            }
        }
    }
}

struct ConvGeom {
    int64_t B, Cin, T, F, Cout, Kt, Kf, dt, df;
};

template <typename S>
ConvGeom conv_geometry(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias,
                       int64_t dt, int64_t df) {
    if (input.rank() != 4)
        throw DimensionError("conv2d: input must be [B,Cin,T,F], got " + shape_str(input.shape()));
    if (kernel.rank() != 4)
        throw DimensionError("conv2d: kernel must be [Cout,Cin,Kt,Kf], got " + shape_str(kernel.shape()));
    if (kernel.dim(1) != input.dim(1))
        throw DimensionError("conv2d: channel axis mismatch, input Cin=" + std::to_string(input.dim(1)) +
                             " kernel Cin=" + std::to_string(kernel.dim(1)));
    if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))
        throw DimensionError("conv2d: bias axis must match Cout=" + std::to_string(kernel.dim(0)));
    if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0)
        throw DimensionError("conv2d: same padding requires odd kernel extents");
    return {input.dim(0), input.dim(1), input.dim(2), input.dim(3),
            kernel.dim(0), kernel.dim(2), kernel.dim(3), dt, df};
}

inline int64_t conv_chunk_frames(const ConvGeom& g) {
    // Cap the im2col scratch near 32 MB per chunk.
    const int64_t budget = (32ll << 20) / static_cast<int64_t>(sizeof(double));
    const int64_t rows = g.Cin * g.Kt * g.Kf;
    return std::clamp<int64_t>(budget / std::max<int64_t>(1, rows * g.F), 8, g.T);
}

} // namespace detail

// "Same"-padded dilated 2-d cross-correlation over [B,Cin,T,F].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias,
                 int64_t dil_t = 1, int64_t dil_f = 1) {
    const auto g = detail::conv_geometry(input, kernel, bias, dil_t, dil_f);
    auto n = detail::make_result<S>({g.B, g.Cout, g.T, g.F}, {input, kernel, bias});

    const int64_t rows = g.Cin * g.Kt * g.Kf;
    const int64_t chunk = detail::conv_chunk_frames(g);
    std::vector<S> cols(rows * chunk * g.F);
    for (int64_t b = 0; b < g.B; ++b) {
        const S* in = input.data() + b * g.Cin * g.T * g.F;
        S* out = n->value.data() + b * g.Cout * g.T * g.F;
        for (int64_t t0 = 0; t0 < g.T; t0 += chunk) {
            const int64_t tc = std::min(chunk, g.T - t0);
            detail::im2col_chunk(in, g.Cin, g.T, g.F, g.Kt, g.Kf, g.dt, g.df, t0, tc, cols.data());
            ConstMatMap<S> W(kernel.data(), g.Cout, rows);
            ConstMatMap<S> C(cols.data(), rows, tc * g.F);
            // Output time-slices are strided by the full T*F plane, so map per channel.
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prod = W * C;
            for (int64_t co = 0; co < g.Cout; ++co) {
                S* dst = out + co * g.T * g.F + t0 * g.F;
                const S* src = prod.data() + co * tc * g.F;
                const S bv = bias.data()[co];
                for (int64_t i = 0; i < tc * g.F; ++i) dst[i] = src[i] + bv;
            }
        }
    }

    if (n->requires_grad) {
        n->backward_fn = [g](Node<S>& self) {
            auto& pin = *self.parents[0];
            auto& pk = *self.parents[1];
            auto& pb = *self.parents[2];
            if (pin.requires_grad) pin.ensure_grad();
            if (pk.requires_grad) pk.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();

            const int64_t rows = g.Cin * g.Kt * g.Kf;
            const int64_t chunk = detail::conv_chunk_frames(g);
            std::vector<S> cols(rows * chunk * g.F);
            std::vector<S> gchunk(g.Cout * chunk * g.F);
            for (int64_t b = 0; b < g.B; ++b) {
                const S* in = pin.value.data() + b * g.Cin * g.T * g.F;
                const S* gout = self.grad.data() + b * g.Cout * g.T * g.F;
                for (int64_t t0 = 0; t0 < g.T; t0 += chunk) {
                    const int64_t tc = std::min(chunk, g.T - t0);
                    for (int64_t co = 0; co < g.Cout; ++co)
                        std::copy_n(gout + co * g.T * g.F + t0 * g.F, tc * g.F, gchunk.data() + co * tc * g.F);
                    ConstMatMap<S> G(gchunk.data(), g.Cout, tc * g.F);
                    if (pk.requires_grad || pin.requires_grad)
                        detail::im2col_chunk(in, g.Cin, g.T, g.F, g.Kt, g.Kf, g.dt, g.df, t0, tc, cols.data());
                    if (pk.requires_grad) {
                        ConstMatMap<S> C(cols.data(), rows, tc * g.F);
                        MatMap<S>(pk.grad.data(), g.Cout, rows).noalias() += G * C.transpose();
                    }
                    if (pb.requires_grad) {
                        for (int64_t co = 0; co < g.Cout; ++co) {
                            S acc = 0;
                            const S* gp = gchunk.data() + co * tc * g.F;
                            for (int64_t i = 0; i < tc * g.F; ++i) acc += gp[i];
                            pb.grad[co] += acc;
                        }
                    }
                    if (pin.requires_grad) {
                        ConstMatMap<S> W(pk.value.data(), g.Cout, rows);
                        MatMap<S>(cols.data(), rows, tc * g.F).noalias() = W.transpose() * G;
                        detail::col2im_chunk(cols.data(), g.Cin, g.T, g.F, g.Kt, g.Kf, g.dt, g.df,
                                             t0, tc, pin.grad.data() + b * g.Cin * g.T * g.F);
                    }
                }
            }
        };
    }
    return Tensor<S>(n);
}

// Harmonic dilated convolution: parallel frequency-dilated branches with one
// 1xKf kernel each, outputs summed (biases included in the sum). Fused so the
// per-branch maps are never materialized.
template <typename S>
Tensor<S> hd_conv(const Tensor<S>& input, const std::vector<Tensor<S>>& kernels,
                  const std::vector<Tensor<S>>& biases, const std::vector<int>& dilations) {
    if (kernels.size() != dilations.size() || biases.size() != dilations.size())
        throw DimensionError("hd_conv: branch count mismatch");
    const size_t nb = kernels.size();
    std::vector<detail::ConvGeom> geom(nb);
    for (size_t i = 0; i < nb; ++i) {
        geom[i] = detail::conv_geometry(input, kernels[i], biases[i], 1, dilations[i]);
        const int64_t span = (geom[i].Kf - 1) * geom[i].df + 1;
        if (span > geom[i].F + (geom[i].Kf - 1) * geom[i].df)
            throw DimensionError("hd_conv: dilated span exceeds padded band on frequency axis");
        if (kernels[i].dim(0) != kernels[0].dim(0))
            throw DimensionError("hd_conv: branches must share Cout");
    }
    const auto g = geom[0];
    std::vector<Tensor<S>> inputs{input};
    for (size_t i = 0; i < nb; ++i) {
        inputs.push_back(kernels[i]);
        inputs.push_back(biases[i]);
    }
    auto n = detail::make_result<S>({g.B, g.Cout, g.T, g.F}, inputs);

    const int64_t chunk = detail::conv_chunk_frames(g);
    {
        std::vector<S> cols;
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prod;
        for (int64_t b = 0; b < g.B; ++b) {
            const S* in = input.data() + b * g.Cin * g.T * g.F;
            S* out = n->value.data() + b * g.Cout * g.T * g.F;
            for (int64_t t0 = 0; t0 < g.T; t0 += chunk) {
                const int64_t tc = std::min(chunk, g.T - t0);
                prod.setZero(g.Cout, tc * g.F);
                for (size_t i = 0; i < nb; ++i) {
                    const auto& gi = geom[i];
                    const int64_t rows = gi.Cin * gi.Kt * gi.Kf;
                    cols.resize(rows * tc * g.F);
                    detail::im2col_chunk(in, gi.Cin, gi.T, gi.F, gi.Kt, gi.Kf, gi.dt, gi.df, t0, tc, cols.data());
                    ConstMatMap<S> W(kernels[i].data(), gi.Cout, rows);
                    ConstMatMap<S> C(cols.data(), rows, tc * g.F);
                    prod.noalias() += W * C;
                }
                for (int64_t co = 0; co < g.Cout; ++co) {
                    S bsum = 0;
                    for (size_t i = 0; i < nb; ++i) bsum += biases[i].data()[co];
                    S* dst = out + co * g.T * g.F + t0 * g.F;
                    const S* src = prod.data() + co * tc * g.F;
                    for (int64_t i = 0; i < tc * g.F; ++i) dst[i] = src[i] + bsum;
                }
            }
        }
    }

    if (n->requires_grad) {
        n->backward_fn = [geom, nb](Node<S>& self) {
            const auto g = geom[0];
            auto& pin = *self.parents[0];
            if (pin.requires_grad) pin.ensure_grad();
            for (size_t i = 0; i < nb; ++i) {
                if (self.parents[1 + 2 * i]->requires_grad) self.parents[1 + 2 * i]->ensure_grad();
                if (self.parents[2 + 2 * i]->requires_grad) self.parents[2 + 2 * i]->ensure_grad();
            }
            const int64_t chunk = detail::conv_chunk_frames(g);
            std::vector<S> cols, gchunk(g.Cout * chunk * g.F);
            std::vector<S> bias_grad(g.Cout, S(0)); // shared by all branches
            for (int64_t b = 0; b < g.B; ++b) {
                const S* in = pin.value.data() + b * g.Cin * g.T * g.F;
                const S* gout = self.grad.data() + b * g.Cout * g.T * g.F;
                for (int64_t t0 = 0; t0 < g.T; t0 += chunk) {
                    const int64_t tc = std::min(chunk, g.T - t0);
                    for (int64_t co = 0; co < g.Cout; ++co)
                        std::copy_n(gout + co * g.T * g.F + t0 * g.F, tc * g.F, gchunk.data() + co * tc * g.F);
                    ConstMatMap<S> G(gchunk.data(), g.Cout, tc * g.F);
                    for (int64_t co = 0; co < g.Cout; ++co) {
                        S acc = 0;
                        const S* gp = gchunk.data() + co * tc * g.F;
                        for (int64_t k = 0; k < tc * g.F; ++k) acc += gp[k];
                        bias_grad[co] += acc;
                    }
                    for (size_t i = 0; i < nb; ++i) {
                        const auto& gi = geom[i];
                        auto& pk = *self.parents[1 + 2 * i];
                        const int64_t rows = gi.Cin * gi.Kt * gi.Kf;
                        cols.resize(rows * tc * g.F);
                        if (pk.requires_grad) {
                            detail::im2col_chunk(in, gi.Cin, gi.T, gi.F, gi.Kt, gi.Kf, gi.dt, gi.df, t0, tc, cols.data());
                            ConstMatMap<S> C(cols.data(), rows, tc * g.F);
                            MatMap<S>(pk.grad.data(), gi.Cout, rows).noalias() += G * C.transpose();
                        }
                        if (pin.requires_grad) {
                            ConstMatMap<S> W(pk.value.data(), gi.Cout, rows);
                            MatMap<S>(cols.data(), rows, tc * g.F).noalias() = W.transpose() * G;
                            detail::col2im_chunk(cols.data(), gi.Cin, gi.T, gi.F, gi.Kt, gi.Kf, gi.dt, gi.df,
                                                 t0, tc, pin.grad.data() + b * g.Cin * g.T * g.F);
                        }
                    }
                }
            }
            // Every branch bias sees the same summed output gradient.
            for (size_t i = 0; i < nb; ++i) {
                auto& pb = *self.parents[2 + 2 * i];
                if (!pb.requires_grad) continue;
                for (int64_t co = 0; co < g.Cout; ++co) pb.grad[co] += bias_grad[co];
            }
        };
    }
    return Tensor<S>(n);
}

// Max over non-overlapping windows of `pool` adjacent frequency bins.
// Gradient routes to the first maximum of each window.
template <typename S>
Tensor<S> max_pool_freq(const Tensor<S>& input, int64_t pool) {
    if (input.rank() != 4)
        throw DimensionError("max_pool_freq: input must be [B,C,T,F]");
    const int64_t F = input.dim(3);
    if (F % pool != 0)
        throw DimensionError("max_pool_freq: frequency extent " + std::to_string(F) +
                             " not divisible by pool " + std::to_string(pool));
    const int64_t B = input.dim(0), C = input.dim(1), T = input.dim(2), Fo = F / pool;
    auto n = detail::make_result<S>({B, C, T, Fo}, {input});
    auto argmax = std::make_shared<std::vector<int32_t>>(n->size());
    const int64_t planes = B * C * T;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < planes; ++r) {
        const S* src = input.data() + r * F;
        S* dst = n->value.data() + r * Fo;
        int32_t* am = argmax->data() + r * Fo;
        for (int64_t fo = 0; fo < Fo; ++fo) {
            int64_t best = fo * pool;
            for (int64_t k = 1; k < pool; ++k)
                if (src[fo * pool + k] > src[best]) best = fo * pool + k;
            dst[fo] = src[best];
            am[fo] = static_cast<int32_t>(best);
        }
    }
    if (n->requires_grad) {
        n->backward_fn = [argmax, F, Fo, planes](Node<S>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (int64_t r = 0; r < planes; ++r)
                for (int64_t fo = 0; fo < Fo; ++fo)
                    p.grad[r * F + (*argmax)[r * Fo + fo]] += self.grad[r * Fo + fo];
        };
    }
    return Tensor<S>(n);
}

// Per-(batch, channel) normalization over the TxF plane (population variance)
// followed by a learned channel-wise affine map.
template <typename S>
Tensor<S> instance_norm(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta,
                        S eps = S(1e-5)) {
    if (input.rank() != 4)
        throw DimensionError("instance_norm: input must be [B,C,T,F]");
    const int64_t B = input.dim(0), C = input.dim(1), M = input.dim(2) * input.dim(3);
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
        throw DimensionError("instance_norm: affine parameters must have extent C=" + std::to_string(C));
    if (M < 2) throw DimensionError("instance_norm: plane needs at least 2 elements");

    auto n = detail::make_result<S>(input.shape(), {input, gamma, beta});
    auto stats = std::make_shared<std::vector<S>>(B * C * 2); // mean, inv_std per plane
#pragma omp parallel for schedule(static)
    for (int64_t pl = 0; pl < B * C; ++pl) {
        const S* src = input.data() + pl * M;
        double mean = 0;
        for (int64_t i = 0; i < M; ++i) mean += src[i];
        mean /= double(M);
        double var = 0;
        for (int64_t i = 0; i < M; ++i) {
            const double d = src[i] - mean;
            var += d * d;
        }
        var /= double(M);
        const S inv_std = S(1.0 / std::sqrt(var + double(eps)));
        (*stats)[pl * 2] = S(mean);
        (*stats)[pl * 2 + 1] = inv_std;
        const S gc = gamma.data()[pl % C];
        const S bc = beta.data()[pl % C];
        S* dst = n->value.data() + pl * M;
        for (int64_t i = 0; i < M; ++i) dst[i] = gc * (src[i] - S(mean)) * inv_std + bc;
    }
    if (n->requires_grad) {
        n->backward_fn = [stats, B, C, M](Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            if (px.requires_grad) px.ensure_grad();
            if (pg.requires_grad) pg.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            for (int64_t pl = 0; pl < B * C; ++pl) {
                const int64_t c = pl % C;
                const S mean = (*stats)[pl * 2];
                const S inv_std = (*stats)[pl * 2 + 1];
                const S* x = px.value.data() + pl * M;
                const S* gy = self.grad.data() + pl * M;
                double sum_gy = 0, sum_gy_xhat = 0;
                for (int64_t i = 0; i < M; ++i) {
                    const double xhat = (x[i] - mean) * inv_std;
                    sum_gy += gy[i];
                    sum_gy_xhat += gy[i] * xhat;
                }
                if (pb.requires_grad) pb.grad[c] += S(sum_gy);
                if (pg.requires_grad) pg.grad[c] += S(sum_gy_xhat);
                if (px.requires_grad) {
                    const S gc = pg.value[c];
                    const S mg = S(sum_gy / double(M));
                    const S mgx = S(sum_gy_xhat / double(M));
                    S* gx = px.grad.data() + pl * M;
                    for (int64_t i = 0; i < M; ++i) {
                        const S xhat = (x[i] - mean) * inv_std;
                        gx[i] += gc * inv_std * (gy[i] - mg - xhat * mgx);
                    }
                }
            }
        };
    }
    return Tensor<S>(n);
}

} // namespace hppnet

#endif
