#ifndef HPPNET_TEST_ORACLES_HPP
#define HPPNET_TEST_ORACLES_HPP

#include "hppnet/checkpoint.hpp"
#include "hppnet/decode.hpp"
#include "hppnet/rng.hpp"
#include "hppnet/tensor.hpp"

#include <functional>

namespace hppnet::test {

template <typename S>
Tensor<S> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = false) {
    std::vector<S> v(shape_size(shape));
    for (auto& x : v) x = static_cast<S>(rng.range(lo, hi));
    return Tensor<S>::from(std::move(shape), std::move(v), requires_grad);
}

struct GradCheckResult {
    double max_rel_err = 0;
    int64_t checked = 0;
    std::string worst_param;
};

// Central finite differences against tape gradients for every element of
// every listed parameter. `loss_fn` must rebuild the graph from the current
// parameter values on each call.
inline GradCheckResult grad_check(std::vector<Parameter<double>>& params,
                                  const std::function<Tensor<double>()>& loss_fn,
                                  double h = 1e-5, int64_t max_per_param = -1) {
    for (auto& p : params) p.tensor.zero_grad();
    auto loss0 = loss_fn();
    const double lbase = std::abs(loss0.item());
    backward(loss0);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params)
        analytic.push_back(p.tensor.has_grad() ? p.tensor.grad() : std::vector<double>(p.tensor.size(), 0.0));

    GradCheckResult r;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& t = params[pi].tensor;
        const int64_t n = max_per_param > 0 ? std::min(max_per_param, t.size()) : t.size();
        for (int64_t i = 0; i < n; ++i) {
            double* w = t.mutable_data();
            const double orig = w[i];
            auto fd_at = [&](double hh) {
                w[i] = orig + hh;
                const double lp = loss_fn().item();
                w[i] = orig - hh;
                const double lm = loss_fn().item();
                w[i] = orig;
                return (lp - lm) / (2 * hh);
            };
            // The losses are piecewise smooth (relu, max pool): a wide step
            // can straddle a kink, while a narrow one loses digits to
            // cancellation (~eps*|loss|/h). Walk a ladder of step sizes and
            // keep the (h, h/2) pair minimizing estimated truncation
            // (|f1-f2|/3) plus roundoff, then Richardson-extrapolate it to
            // cancel the O(h^2) term.
            const double noise = 4 * std::numeric_limits<double>::epsilon() * std::max(lbase, 1.0);
            double fd = 0;
            double best = std::numeric_limits<double>::infinity();
            for (double hh = 100 * h; hh >= h / 200; hh /= 10) {
                const double f1 = fd_at(hh), f2 = fd_at(hh / 2);
                const double score = std::abs(f1 - f2) / 3 + noise / hh;
                if (score < best) {
                    best = score;
                    fd = (4 * f2 - f1) / 3;
                }
            }
            const double a = analytic[pi][i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4});
            if (rel > r.max_rel_err) {
                r.max_rel_err = rel;
                r.worst_param = params[pi].name;
            }
            r.checked += 1;
        }
    }
    return r;
}

// Exhaustive maximum matching by recursion over ref notes: the oracle for
// note_score on small instances.
inline int max_matching_brute(const std::vector<std::vector<int>>& compat, size_t n_est) {
    std::vector<char> used(n_est, 0);
    std::function<int(size_t)> go = [&](size_t r) -> int {
        if (r == compat.size()) return 0;
        int best = go(r + 1); // leave ref r unmatched
        for (int e : compat[r]) {
            if (used[e]) continue;
            used[e] = 1;
            best = std::max(best, 1 + go(r + 1));
            used[e] = 0;
        }
        return best;
    };
    return go(0);
}

} // namespace hppnet::test

#endif
