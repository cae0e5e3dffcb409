#ifndef HPPNET_LSTM_HPP
#define HPPNET_LSTM_HPP

#include "hppnet/ops.hpp"

namespace hppnet {

// One direction of weights. Gate order along the 4H axis: input, forget,
// cell, output.
template <typename S>
struct LstmDirectionParams {
    Tensor<S> w_ih; // [Din, 4H]
    Tensor<S> w_hh; // [H, 4H]
    Tensor<S> bias; // [4H]
};

template <typename S>
struct BiLstmParams {
    LstmDirectionParams<S> fwd;
    LstmDirectionParams<S> bwd;
};

namespace detail {

template <typename S>
struct LstmTrace {
    // Post-activation gates and cell state per direction, each [T][N*H].
    std::vector<S> i[2], f[2], g[2], o[2], c[2];
};

template <typename S>
using Arr2D = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Arr2DMap = Eigen::Map<Arr2D<S>>;
template <typename S>
using CArr2DMap = Eigen::Map<const Arr2D<S>>;
// One gate's HxN view of an interleaved [N,4H] buffer.
template <typename S>
using GateMap = Eigen::Map<Arr2D<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using CGateMap = Eigen::Map<const Arr2D<S>, 0, Eigen::OuterStride<>>;

} // namespace detail

// Bidirectional LSTM over N independent sequences sharing one weight set.
// input [N,T,Din] -> output [N,T,2H] with the forward direction in the first
// H features. Zero initial states; fused backward through time.
template <typename S>
Tensor<S> bilstm_seq(const Tensor<S>& input, const BiLstmParams<S>& params, int64_t hidden) {
    if (input.rank() != 3)
        throw DimensionError("bilstm_seq: input must be [N,T,Din], got " + shape_str(input.shape()));
    const int64_t N = input.dim(0), T = input.dim(1), Din = input.dim(2), H = hidden;
    for (const auto* d : {&params.fwd, &params.bwd}) {
        if (d->w_ih.shape() != Shape{Din, 4 * H} || d->w_hh.shape() != Shape{H, 4 * H} ||
            d->bias.shape() != Shape{4 * H})
            throw DimensionError("bilstm_seq: weight shapes do not match Din=" + std::to_string(Din) +
                                 " H=" + std::to_string(H));
    }

    auto n = detail::make_result<S>({N, T, 2 * H},
                                    {input, params.fwd.w_ih, params.fwd.w_hh, params.fwd.bias,
                                     params.bwd.w_ih, params.bwd.w_hh, params.bwd.bias});
    auto trace = std::make_shared<detail::LstmTrace<S>>();

    std::vector<S> xg(N * T * 4 * H), z(N * 4 * H), h_prev(N * H, S(0)), c_prev(N * H, S(0));
    for (int dir = 0; dir < 2; ++dir) {
        const auto& dp = dir == 0 ? params.fwd : params.bwd;
        for (auto* buf : {&trace->i[dir], &trace->f[dir], &trace->g[dir], &trace->o[dir], &trace->c[dir]})
            buf->assign(T * N * H, S(0));
        // Input contribution for every step in one product.
        ConstMatMap<S> X(input.data(), N * T, Din);
        ConstMatMap<S> Wih(dp.w_ih.data(), Din, 4 * H);
        MatMap<S>(xg.data(), N * T, 4 * H).noalias() = X * Wih;
        std::fill(h_prev.begin(), h_prev.end(), S(0));
        std::fill(c_prev.begin(), c_prev.end(), S(0));
        for (int64_t step = 0; step < T; ++step) {
            const int64_t t = dir == 0 ? step : T - 1 - step;
            ConstMatMap<S> Hp(h_prev.data(), N, H);
            ConstMatMap<S> Whh(dp.w_hh.data(), H, 4 * H);
            MatMap<S> Z(z.data(), N, 4 * H);
            Z.noalias() = Hp * Whh;
            const S* bias = dp.bias.data();
            S* it = trace->i[dir].data() + step * N * H;
            S* ft = trace->f[dir].data() + step * N * H;
            S* gt = trace->g[dir].data() + step * N * H;
            S* ot = trace->o[dir].data() + step * N * H;
            S* ct = trace->c[dir].data() + step * N * H;
            for (int64_t nn = 0; nn < N; ++nn) {
                Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> zrow(z.data() + nn * 4 * H, 4 * H);
                zrow += Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                            xg.data() + (nn * T + t) * 4 * H, 4 * H) +
                        Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(bias, 4 * H);
            }
            const Eigen::OuterStride<> zs(4 * H);
            detail::CGateMap<S> Zi(z.data(), N, H, zs), Zf(z.data() + H, N, H, zs),
                Zg(z.data() + 2 * H, N, H, zs), Zo(z.data() + 3 * H, N, H, zs);
            detail::Arr2DMap<S> Iv(it, N, H), Fv(ft, N, H), Gv(gt, N, H), Ov(ot, N, H), Cv(ct, N, H);
            detail::Arr2DMap<S> Cp(c_prev.data(), N, H), Hn(h_prev.data(), N, H);
            Iv = S(1) / (S(1) + (-Zi).exp());
            Fv = S(1) / (S(1) + (-Zf).exp());
            Gv = Zg.tanh();
            Ov = S(1) / (S(1) + (-Zo).exp());
            Cv = Fv * Cp + Iv * Gv;
            Hn = Ov * Cv.tanh();
            for (int64_t nn = 0; nn < N; ++nn)
                std::copy_n(h_prev.data() + nn * H, H,
                            n->value.data() + (nn * T + t) * 2 * H + dir * H);
            std::copy_n(trace->c[dir].data() + step * N * H, N * H, c_prev.data());
        }
    }

    if (n->requires_grad) {
        n->backward_fn = [trace, N, T, Din, H](Node<S>& self) {
            auto& pin = *self.parents[0];
            if (pin.requires_grad) pin.ensure_grad();
            for (int dir = 0; dir < 2; ++dir) {
                auto& p_wih = *self.parents[1 + dir * 3];
                auto& p_whh = *self.parents[2 + dir * 3];
                auto& p_bias = *self.parents[3 + dir * 3];
                for (auto* p : {&p_wih, &p_whh, &p_bias})
                    if (p->requires_grad) p->ensure_grad();

                std::vector<S> dz_all(N * T * 4 * H, S(0));
                std::vector<S> dh(N * H, S(0)), dc(N * H, S(0));
                std::vector<S> h_prev(N * H), dz_step(N * 4 * H);
                std::vector<S> tc(N * H), dct(N * H);
                for (int64_t step = T - 1; step >= 0; --step) {
                    const int64_t t = dir == 0 ? step : T - 1 - step;
                    const S* it = trace->i[dir].data() + step * N * H;
                    const S* ft = trace->f[dir].data() + step * N * H;
                    const S* gt = trace->g[dir].data() + step * N * H;
                    const S* ot = trace->o[dir].data() + step * N * H;
                    const S* ct = trace->c[dir].data() + step * N * H;
                    const S* ct_prev = step > 0 ? trace->c[dir].data() + (step - 1) * N * H : nullptr;
                    // h_{t-1} lives in the output value at the previous step.
                    if (step > 0) {
                        const int64_t tp = dir == 0 ? t - 1 : t + 1;
                        for (int64_t nn = 0; nn < N; ++nn)
                            std::copy_n(self.value.data() + (nn * T + tp) * 2 * H + dir * H, H,
                                        h_prev.data() + nn * H);
                    } else {
                        std::fill(h_prev.begin(), h_prev.end(), S(0));
                    }
                    for (int64_t nn = 0; nn < N; ++nn)
                        Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(dh.data() + nn * H, H) +=
                            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(
                                self.grad.data() + (nn * T + t) * 2 * H + dir * H, H);
                    detail::CArr2DMap<S> Iv(it, N, H), Fv(ft, N, H), Gv(gt, N, H), Ov(ot, N, H),
                        Cv(ct, N, H);
                    detail::Arr2DMap<S> Dh(dh.data(), N, H), Dc(dc.data(), N, H);
                    detail::Arr2DMap<S> Tc(tc.data(), N, H), Dct(dct.data(), N, H);
                    Tc = Cv.tanh();
                    Dct = Dc + Dh * Ov * (S(1) - Tc * Tc);
                    const Eigen::OuterStride<> zs(4 * H);
                    detail::GateMap<S> DZi(dz_step.data(), N, H, zs),
                        DZf(dz_step.data() + H, N, H, zs), DZg(dz_step.data() + 2 * H, N, H, zs),
                        DZo(dz_step.data() + 3 * H, N, H, zs);
                    DZi = Dct * Gv * Iv * (S(1) - Iv);
                    DZg = Dct * Iv * (S(1) - Gv * Gv);
                    DZo = Dh * Tc * Ov * (S(1) - Ov);
                    if (ct_prev) {
                        detail::CArr2DMap<S> Cprev(ct_prev, N, H);
                        DZf = Dct * Cprev * Fv * (S(1) - Fv);
                    } else {
                        DZf.setZero();
                    }
                    Dc = Dct * Fv;
                    // Recurrent gradient and weight accumulation for this step.
                    ConstMatMap<S> DZ(dz_step.data(), N, 4 * H);
                    ConstMatMap<S> Whh(p_whh.value.data(), H, 4 * H);
                    MatMap<S>(dh.data(), N, H).noalias() = DZ * Whh.transpose();
                    if (p_whh.requires_grad) {
                        ConstMatMap<S> Hp(h_prev.data(), N, H);
                        MatMap<S>(p_whh.grad.data(), H, 4 * H).noalias() += Hp.transpose() * DZ;
                    }
                    if (p_bias.requires_grad)
                        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(p_bias.grad.data(), 4 * H) +=
                            DZ.colwise().sum();
                    for (int64_t nn = 0; nn < N; ++nn)
                        std::copy_n(dz_step.data() + nn * 4 * H, 4 * H,
                                    dz_all.data() + (nn * T + t) * 4 * H);
                }
                ConstMatMap<S> DZall(dz_all.data(), N * T, 4 * H);
                if (p_wih.requires_grad) {
                    ConstMatMap<S> X(pin.value.data(), N * T, Din);
                    MatMap<S>(p_wih.grad.data(), Din, 4 * H).noalias() += X.transpose() * DZall;
                }
                if (pin.requires_grad) {
                    ConstMatMap<S> Wih(p_wih.value.data(), Din, 4 * H);
                    MatMap<S>(pin.grad.data(), N * T, Din).noalias() += DZall * Wih.transpose();
                }
            }
        };
    }
    return Tensor<S>(n);
}

} // namespace hppnet

#endif
