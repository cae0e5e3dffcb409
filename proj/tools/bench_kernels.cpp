// Micro-benchmark: the GEMM/OpenMP kernels against the serial reference
// implementations used as test oracles.
#include "hppnet/conv.hpp"
#include "hppnet/lstm.hpp"
#include "hppnet/reference.hpp"
#include "hppnet/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace hppnet;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

template <typename S>
Tensor<S> rand_tensor(Rng& rng, Shape shape) {
    std::vector<S> v(shape_size(shape));
    for (auto& x : v) x = S(rng.range(-1.0, 1.0));
    return Tensor<S>::from(std::move(shape), std::move(v));
}

void row(const char* name, double fast_ms, double ref_ms, double max_abs_diff) {
    std::printf("%-28s %10.2f ms %12.2f ms %9.2fx   max|diff| %.2e\n", name, fast_ms, ref_ms,
                ref_ms / fast_ms, max_abs_diff);
}

} // namespace

int main() {
    Rng rng(1);
    std::printf("%-28s %13s %15s %10s\n", "kernel", "gemm/omp", "serial ref", "speedup");

    { // conv2d, the block shape: 48ch, 3x5 kernel, dilation (1,12)
        const int B = 1, C = 48, T = 125, F = 88;
        auto input = rand_tensor<float>(rng, {B, C, T, F});
        auto kernel = rand_tensor<float>(rng, {C, C, 3, 5});
        auto bias = rand_tensor<float>(rng, {C});
        Tensor<float> out;
        std::vector<float> expect(size_t(B) * C * T * F);
        const double fast = time_ms([&] { out = conv2d(input, kernel, bias, 1, 12); }, 3);
        const double slow = time_ms([&] {
            ref::conv2d(input.data(), B, C, T, F, kernel.data(), bias.data(), C, 3, 5, 1, 12,
                        expect.data());
        }, 1);
        double diff = 0;
        for (int64_t i = 0; i < out.size(); ++i)
            diff = std::max(diff, double(std::abs(out.data()[i] - expect[i])));
        row("conv2d 48x48 3x5 d(1,12)", fast, slow, diff);
    }

    { // the 7x7 input stack layer
        const int B = 1, T = 125, F = 352;
        auto input = rand_tensor<float>(rng, {B, 16, T, F});
        auto kernel = rand_tensor<float>(rng, {16, 16, 7, 7});
        auto bias = rand_tensor<float>(rng, {16});
        Tensor<float> out;
        std::vector<float> expect(size_t(B) * 16 * T * F);
        const double fast = time_ms([&] { out = conv2d(input, kernel, bias); }, 3);
        const double slow = time_ms([&] {
            ref::conv2d(input.data(), B, 16, T, F, kernel.data(), bias.data(), 16, 7, 7, 1, 1,
                        expect.data());
        }, 1);
        double diff = 0;
        for (int64_t i = 0; i < out.size(); ++i)
            diff = std::max(diff, double(std::abs(out.data()[i] - expect[i])));
        row("conv2d 16x16 7x7", fast, slow, diff);
    }

    { // frequency max pool
        const int B = 1, C = 48, T = 500, F = 352;
        auto input = rand_tensor<float>(rng, {B, C, T, F});
        Tensor<float> out;
        std::vector<float> expect;
        const double fast = time_ms([&] { out = max_pool_freq(input, 4); }, 5);
        // allocate inside the loop so both sides pay for their output buffer
        const double slow = time_ms([&] {
            std::vector<float> tmp(size_t(B) * C * T * (F / 4));
            ref::max_pool_freq(input.data(), int64_t(B) * C * T, F, 4, tmp.data());
            expect = std::move(tmp);
        }, 5);
        double diff = 0;
        for (int64_t i = 0; i < out.size(); ++i)
            diff = std::max(diff, double(std::abs(out.data()[i] - expect[i])));
        row("max_pool_freq 352->88", fast, slow, diff);
    }

    { // fused biLSTM over the 88 key groups
        const int N = 88, T = 125, D = 48, H = 48;
        auto input = rand_tensor<float>(rng, {N, T, D});
        BiLstmParams<float> p;
        for (auto* d : {&p.fwd, &p.bwd}) {
            d->w_ih = rand_tensor<float>(rng, {D, 4 * H});
            d->w_hh = rand_tensor<float>(rng, {H, 4 * H});
            d->bias = rand_tensor<float>(rng, {4 * H});
        }
        Tensor<float> out;
        std::vector<float> expect(size_t(N) * T * 2 * H);
        const double fast = time_ms([&] { out = bilstm_seq(input, p, H); }, 3);
        const double slow = time_ms([&] {
            for (int n = 0; n < N; ++n)
                ref::bilstm_seq(input.data() + int64_t(n) * T * D, T, D,
                                p.fwd.w_ih.data(), p.fwd.w_hh.data(), p.fwd.bias.data(),
                                p.bwd.w_ih.data(), p.bwd.w_hh.data(), p.bwd.bias.data(), H,
                                expect.data() + int64_t(n) * T * 2 * H);
        }, 1);
        double diff = 0;
        for (int64_t i = 0; i < out.size(); ++i)
            diff = std::max(diff, double(std::abs(out.data()[i] - expect[i])));
        row("bilstm 88x125 H=48", fast, slow, diff);
    }

    return 0;
}
