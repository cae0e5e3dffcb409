#ifndef HPPNET_LOSS_HPP
#define HPPNET_LOSS_HPP

#include "hppnet/model.hpp"

namespace hppnet {

// -w*y*log(p) - (1-y)*log(1-p) with p clamped to [eps, 1-eps].
inline double bce(double y, double yhat, double w, double eps = 1e-7) {
    const double p = std::clamp(yhat, eps, 1.0 - eps);
    return -w * y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
}

// Ground-truth rolls for a batch, each [B,T,88]. v is nonzero only where the
// onset roll is 1; the onset roll doubles as the velocity mask.
template <typename S>
struct TargetBatch {
    Tensor<S> n, f, o, v;
};

template <typename S>
struct LossBreakdown {
    Tensor<S> onset, frame, offset, velocity, total;

    double onset_value() const { return double(onset.item()); }
    double frame_value() const { return double(frame.item()); }
    double offset_value() const { return double(offset.item()); }
    double velocity_value() const { return double(velocity.item()); }
    double total_value() const { return double(total.item()); }
};

// Sum reduction over pitch and time per clip, mean over the batch.
// Onset uses positive weight 2; frame and offset weight 1; velocity is a
// squared error counted only where the onset target is 1.
template <typename S>
LossBreakdown<S> total_loss(const HeadOutputs<S>& pred, const TargetBatch<S>& targets) {
    detail::check_same_shape(pred.onset, targets.n, "total_loss");
    const S inv_b = S(1) / S(pred.onset.dim(0));
    LossBreakdown<S> out;
    out.onset = scale(bce_sum(pred.onset, targets.n, S(2)), inv_b);
    out.frame = scale(bce_sum(pred.frame, targets.f, S(1)), inv_b);
    out.offset = scale(bce_sum(pred.offset, targets.o, S(1)), inv_b);
    out.velocity = scale(masked_sq_sum(pred.velocity, targets.v, targets.n), inv_b);
    out.total = add(add(out.onset, out.frame), add(out.offset, out.velocity));
    return out;
}

} // namespace hppnet

#endif
