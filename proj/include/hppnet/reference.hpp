#ifndef HPPNET_REFERENCE_HPP
#define HPPNET_REFERENCE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

// Serial reference kernels, independent of the tensor/tape machinery. They
// define the semantics the optimized ops are tested and benchmarked against.
namespace hppnet::ref {

// "Same"-padded dilated cross-correlation, naive loops.
// input [B,Cin,T,F], kernel [Cout,Cin,Kt,Kf], out [B,Cout,T,F].
template <typename S>
void conv2d(const S* input, int64_t B, int64_t Cin, int64_t T, int64_t F,
            const S* kernel, const S* bias, int64_t Cout, int64_t Kt, int64_t Kf,
            int64_t dt, int64_t df, S* out) {
    const int64_t pad_t = (Kt - 1) * dt / 2;
    const int64_t pad_f = (Kf - 1) * df / 2;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t co = 0; co < Cout; ++co)
            for (int64_t t = 0; t < T; ++t)
                for (int64_t f = 0; f < F; ++f) {
                    double acc = bias ? bias[co] : 0;
                    for (int64_t ci = 0; ci < Cin; ++ci)
                        for (int64_t kt = 0; kt < Kt; ++kt)
                            for (int64_t kf = 0; kf < Kf; ++kf) {
                                const int64_t ts = t - pad_t + kt * dt;
                                const int64_t fs = f - pad_f + kf * df;
                                if (ts < 0 || ts >= T || fs < 0 || fs >= F) continue;
                                acc += double(input[((b * Cin + ci) * T + ts) * F + fs]) *
                                       double(kernel[((co * Cin + ci) * Kt + kt) * Kf + kf]);
                            }
                    out[((b * Cout + co) * T + t) * F + f] = S(acc);
                }
}

template <typename S>
void max_pool_freq(const S* input, int64_t planes, int64_t F, int64_t pool, S* out) {
    const int64_t Fo = F / pool;
    for (int64_t r = 0; r < planes; ++r)
        for (int64_t fo = 0; fo < Fo; ++fo) {
            S best = input[r * F + fo * pool];
            for (int64_t k = 1; k < pool; ++k) best = std::max(best, input[r * F + fo * pool + k]);
            out[r * Fo + fo] = best;
        }
}

// Single LSTM step on one sequence, scalar math. Gate order i,f,g,o.
template <typename S>
void lstm_step(const S* x, int64_t din, const S* w_ih, const S* w_hh, const S* bias,
               int64_t hidden, std::vector<S>& h, std::vector<S>& c) {
    std::vector<S> z(4 * hidden);
    for (int64_t j = 0; j < 4 * hidden; ++j) {
        double acc = bias[j];
        for (int64_t k = 0; k < din; ++k) acc += double(x[k]) * double(w_ih[k * 4 * hidden + j]);
        for (int64_t k = 0; k < hidden; ++k) acc += double(h[k]) * double(w_hh[k * 4 * hidden + j]);
        z[j] = S(acc);
    }
    for (int64_t j = 0; j < hidden; ++j) {
        const S i = S(1) / (S(1) + std::exp(-z[j]));
        const S f = S(1) / (S(1) + std::exp(-z[hidden + j]));
        const S g = std::tanh(z[2 * hidden + j]);
        const S o = S(1) / (S(1) + std::exp(-z[3 * hidden + j]));
        c[j] = f * c[j] + i * g;
        h[j] = o * std::tanh(c[j]);
    }
}

// Full bidirectional pass for one sequence: x [T,din] -> out [T,2*hidden].
template <typename S>
void bilstm_seq(const S* x, int64_t T, int64_t din,
                const S* fw_ih, const S* fw_hh, const S* fb,
                const S* bw_ih, const S* bw_hh, const S* bb,
                int64_t hidden, S* out) {
    std::vector<S> h(hidden, S(0)), c(hidden, S(0));
    for (int64_t t = 0; t < T; ++t) {
        lstm_step(x + t * din, din, fw_ih, fw_hh, fb, hidden, h, c);
        for (int64_t j = 0; j < hidden; ++j) out[t * 2 * hidden + j] = h[j];
    }
    std::fill(h.begin(), h.end(), S(0));
    std::fill(c.begin(), c.end(), S(0));
    for (int64_t t = T - 1; t >= 0; --t) {
        lstm_step(x + t * din, din, bw_ih, bw_hh, bb, hidden, h, c);
        for (int64_t j = 0; j < hidden; ++j) out[t * 2 * hidden + hidden + j] = h[j];
    }
}

} // namespace hppnet::ref

#endif
