#ifndef HPPNET_TRAIN_HPP
#define HPPNET_TRAIN_HPP

#include "hppnet/data.hpp"
#include "hppnet/loss.hpp"
#include "hppnet/metrics.hpp"
#include "hppnet/model.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace hppnet {

struct TrainConfig {
    int batch_size = 4;
    double learning_rate = 6e-4;
    int64_t max_steps = 1000;
    int64_t eval_every = 50;
    int patience = 10;
    uint64_t seed = 1;
    Variant variant = Variant::Base;
    double clip_norm = 0; // 0 = off; user-rescue flag
    double onset_thresh = 0.4, frame_thresh = 0.4;
    // optional early exit once validation reaches both targets (0 = off)
    double stop_note_f1 = 0, stop_frame_f1 = 0;
};

template <typename S>
struct AdamState {
    std::vector<std::vector<S>> m, v;
    int64_t step = 0;
    S beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);

    void init(const std::vector<Parameter<S>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor.size(), S(0));
            v.emplace_back(p.tensor.size(), S(0));
        }
        step = 0;
    }
};

// Standard Adam with bias correction. Parameters without a populated grad
// buffer are treated as zero-gradient (unchanged values, moments decay).
template <typename S>
void adam_step(std::vector<Parameter<S>>& params, AdamState<S>& state, S lr) {
    if (state.m.size() != params.size()) state.init(params);
    state.step += 1;
    const S bc1 = S(1) - std::pow(state.beta1, S(state.step));
    const S bc2 = S(1) - std::pow(state.beta2, S(state.step));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& t = params[pi].tensor;
        S* w = t.mutable_data();
        const bool has_grad = t.has_grad();
        const auto& g = t.grad();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (int64_t i = 0; i < t.size(); ++i) {
            const S gi = has_grad ? g[i] : S(0);
            m[i] = state.beta1 * m[i] + (S(1) - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (S(1) - state.beta2) * gi * gi;
            const S mhat = m[i] / bc1;
            const S vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

namespace detail {

template <typename S>
void scale_grads_to_norm(std::vector<Parameter<S>>& params, double max_norm) {
    double sq = 0;
    for (auto& p : params)
        if (p.tensor.has_grad())
            for (S g : p.tensor.grad()) sq += double(g) * double(g);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0) return;
    const S f = S(max_norm / norm);
    for (auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        auto& g = const_cast<std::vector<S>&>(p.tensor.grad());
        for (auto& v : g) v *= f;
    }
}

template <typename S>
void check_finite_grads(const std::vector<Parameter<S>>& params) {
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (S g : p.tensor.grad())
            if (!std::isfinite(double(g)))
                throw ContractError("non-finite gradient in parameter '" + p.name + "'; aborting training");
    }
}

} // namespace detail

// Stack equal-length samples into the model input and target rolls.
template <typename S>
std::pair<Tensor<S>, TargetBatch<S>>
build_batch(std::vector<Sample>& samples, const std::vector<int>& indices, const CqtTransform& transform) {
    const auto& first = samples[indices[0]].ensure_spectrogram(transform);
    const int64_t T = first.frames, F = first.n_bins;
    const int64_t B = static_cast<int64_t>(indices.size());
    std::vector<S> input(B * T * F);
    std::vector<S> n(B * T * 88), f(B * T * 88), o(B * T * 88), v(B * T * 88);
    for (int64_t b = 0; b < B; ++b) {
        auto& s = samples[indices[b]];
        const auto& spec = s.ensure_spectrogram(transform);
        if (spec.frames != T)
            throw DimensionError("build_batch: mixed frame counts in one batch");
        for (int64_t i = 0; i < T * F; ++i) input[b * T * F + i] = S(spec.values[i]);
        for (int64_t i = 0; i < T * 88; ++i) {
            n[b * T * 88 + i] = S(s.targets.n[i]);
            f[b * T * 88 + i] = S(s.targets.f[i]);
            o[b * T * 88 + i] = S(s.targets.o[i]);
            v[b * T * 88 + i] = S(s.targets.v[i]);
        }
    }
    TargetBatch<S> targets{Tensor<S>::from({B, T, 88}, std::move(n)),
                           Tensor<S>::from({B, T, 88}, std::move(f)),
                           Tensor<S>::from({B, T, 88}, std::move(o)),
                           Tensor<S>::from({B, T, 88}, std::move(v))};
    return {Tensor<S>::from({B, 1, T, F}, std::move(input)), targets};
}

struct EvalResult {
    double note_f1 = 0, frame_f1 = 0;
};

// Mean per-clip note F1 (onset-only) and frame F1 at the given thresholds.
template <typename S>
EvalResult evaluate_model(HppNet<S>& model, std::vector<Sample>& samples,
                          const CqtTransform& transform, double onset_thresh, double frame_thresh) {
    EvalResult r;
    for (size_t i = 0; i < samples.size(); ++i) {
        std::vector<int> idx{static_cast<int>(i)};
        auto [input, targets] = build_batch<S>(samples, idx, transform);
        auto heads = model.forward(input);
        Posteriorgram post = to_posteriorgram(heads, 0);
        const auto est = decode(post, onset_thresh, frame_thresh);
        r.note_f1 += note_score(samples[i].notes, est).f1;
        std::vector<uint8_t> est_roll(post.frames * 88, 0);
        for (int64_t c = 0; c < post.frames * 88; ++c) est_roll[c] = post.frame[c] >= frame_thresh;
        r.frame_f1 += frame_score(samples[i].targets.f, est_roll).f1;
    }
    if (!samples.empty()) {
        r.note_f1 /= double(samples.size());
        r.frame_f1 /= double(samples.size());
    }
    return r;
}

struct TrainResult {
    std::string checkpoint_path, config_path, log_path;
    double best_note_f1 = -1;
    int64_t steps_run = 0;
};

// Shuffled mini-batch training with periodic validation, best-note-F1
// checkpointing and patience-based early stopping. Deterministic given the
// seed. Batches always hold equal-length clips (bucketed by frame count).
template <typename S>
TrainResult train_loop(const TrainConfig& cfg, const ModelConfig& mcfg,
                       std::vector<Sample>& train, std::vector<Sample>& val,
                       const std::string& out_dir, bool verbose = false) {
    std::filesystem::create_directories(out_dir);
    TrainResult result;
    result.checkpoint_path = out_dir + "/best.ckpt";
    result.config_path = out_dir + "/best.ckpt.cfg";
    result.log_path = out_dir + "/metrics.jsonl";

    HppNet<S> model(mcfg, cfg.seed);
    auto params = model.parameters();
    AdamState<S> adam;
    adam.init(params);
    CqtTransform transform;
    std::ofstream log(result.log_path);
    if (!log) throw IoError("cannot open metric log: " + result.log_path);

    // bucket train indices by frame count
    std::map<int64_t, std::vector<int>> buckets;
    for (size_t i = 0; i < train.size(); ++i) {
        const auto& spec = train[i].ensure_spectrogram(transform);
        buckets[spec.frames].push_back(static_cast<int>(i));
    }

    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::vector<int>> batches;
    auto refill_batches = [&]() {
        batches.clear();
        for (auto& [frames, idx] : buckets) {
            // Fisher-Yates with the run rng
            for (size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[rng.next_u32() % i]);
            for (size_t i = 0; i < idx.size(); i += cfg.batch_size) {
                const size_t hi = std::min(idx.size(), i + cfg.batch_size);
                batches.emplace_back(idx.begin() + i, idx.begin() + hi);
            }
        }
        for (size_t i = batches.size(); i > 1; --i)
            std::swap(batches[i - 1], batches[rng.next_u32() % i]);
    };

    auto save_best = [&]() {
        auto ps = model.parameters();
        save_checkpoint(ps, result.checkpoint_path);
        mcfg.save(result.config_path);
    };

    save_best(); // step-0 checkpoint; overwritten whenever validation improves
    int evals_since_improvement = 0;
    bool stop = false;
    size_t batch_cursor = 0;
    for (int64_t step = 1; step <= cfg.max_steps && !stop; ++step) {
        if (batch_cursor >= batches.size()) {
            refill_batches();
            batch_cursor = 0;
        }
        if (batches.empty()) break;
        const auto& batch = batches[batch_cursor++];
        auto [input, targets] = build_batch<S>(train, batch, transform);
        auto heads = model.forward(input);
        auto loss = total_loss(heads, targets);
        for (auto& p : params) p.tensor.zero_grad();
        backward(loss.total);
        detail::check_finite_grads(params);
        if (cfg.clip_norm > 0) detail::scale_grads_to_norm(params, cfg.clip_norm);
        adam_step(params, adam, S(cfg.learning_rate));
        result.steps_run = step;

        if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
            auto ev = evaluate_model(model, val, transform, cfg.onset_thresh, cfg.frame_thresh);
            log << "{\"step\":" << step << ",\"onset\":" << loss.onset_value()
                << ",\"frame\":" << loss.frame_value() << ",\"offset\":" << loss.offset_value()
                << ",\"velocity\":" << loss.velocity_value() << ",\"total\":" << loss.total_value()
                << ",\"note_f1\":" << ev.note_f1 << ",\"frame_f1\":" << ev.frame_f1 << "}\n";
            log.flush();
            if (verbose)
                std::cerr << "step " << step << " loss " << loss.total_value() << " note_f1 " << ev.note_f1
                          << " frame_f1 " << ev.frame_f1 << "\n";
            if (ev.note_f1 > result.best_note_f1) {
                result.best_note_f1 = ev.note_f1;
                evals_since_improvement = 0;
                save_best();
            } else if (++evals_since_improvement >= cfg.patience) {
                stop = true;
            }
            if (cfg.stop_note_f1 > 0 && ev.note_f1 >= cfg.stop_note_f1 &&
                ev.frame_f1 >= cfg.stop_frame_f1) {
                // This model met both targets; keep it even if an earlier
                // eval had a higher note F1 on its own.
                result.best_note_f1 = ev.note_f1;
                save_best();
                stop = true;
            }
        }
    }
    return result;
}

} // namespace hppnet

#endif
