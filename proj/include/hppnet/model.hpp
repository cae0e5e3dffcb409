#ifndef HPPNET_MODEL_HPP
#define HPPNET_MODEL_HPP

#include "hppnet/checkpoint.hpp"
#include "hppnet/conv.hpp"
#include "hppnet/decode.hpp"
#include "hppnet/lstm.hpp"
#include "hppnet/rng.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace hppnet {

enum class Variant { Base, Sp, Tiny };

inline std::string variant_name(Variant v) {
    switch (v) {
    case Variant::Base: return "base";
    case Variant::Sp: return "sp";
    case Variant::Tiny: return "tiny";
    }
    return "base";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "base") return Variant::Base;
    if (s == "sp") return Variant::Sp;
    if (s == "tiny") return Variant::Tiny;
    throw FormatError("unknown model variant: " + s);
}

struct ModelConfig {
    Variant variant = Variant::Base;
    int channels = 128;          // 48 for tiny
    int lstm_units = 64;         // per direction; 48 for tiny
    int conv_stack_filters = 16;
    std::vector<int> hd_dilations = {48, 76, 96, 111, 124, 135, 144, 152};
    int block_count = 4;
    int block_kernel_t = 3, block_kernel_f = 5;
    int block_dilation_t = 1, block_dilation_f = 12;
    int pool = 4;
    int n_keys = 88;
    int n_bins = 352;

    static ModelConfig for_variant(Variant v) {
        ModelConfig c;
        c.variant = v;
        if (v == Variant::Tiny) {
            c.channels = 48;
            c.lstm_units = 48;
        }
        return c;
    }

    void validate() const {
        const int max_d = *std::max_element(hd_dilations.begin(), hd_dilations.end());
        if (max_d * 2 + 1 > n_bins)
            throw DimensionError("hd dilation span " + std::to_string(max_d * 2 + 1) +
                                 " exceeds band of " + std::to_string(n_bins) + " bins");
        if (n_bins % pool != 0 || n_bins / pool != n_keys)
            throw DimensionError("pool must map n_bins onto n_keys");
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write model config: " + path);
        os << "variant=" << variant_name(variant) << "\n"
           << "channels=" << channels << "\n"
           << "lstm_units=" << lstm_units << "\n"
           << "conv_stack_filters=" << conv_stack_filters << "\n";
        os << "hd_dilations=";
        for (size_t i = 0; i < hd_dilations.size(); ++i) os << (i ? "," : "") << hd_dilations[i];
        os << "\n"
           << "block_count=" << block_count << "\n"
           << "block_kernel=" << block_kernel_t << "x" << block_kernel_f << "\n"
           << "block_dilation=" << block_dilation_t << "x" << block_dilation_f << "\n"
           << "pool=" << pool << "\n"
           << "n_keys=" << n_keys << "\n"
           << "n_bins=" << n_bins << "\n";
    }

    static ModelConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot read model config: " + path);
        std::map<std::string, std::string> kv;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw FormatError("bad config line: " + line);
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        ModelConfig c;
        auto want = [&](const std::string& k) {
            auto it = kv.find(k);
            if (it == kv.end()) throw FormatError("config missing key: " + k);
            return it->second;
        };
        c.variant = variant_from_name(want("variant"));
        c.channels = std::stoi(want("channels"));
        c.lstm_units = std::stoi(want("lstm_units"));
        c.conv_stack_filters = std::stoi(want("conv_stack_filters"));
        c.hd_dilations.clear();
        std::stringstream ss(want("hd_dilations"));
        std::string tok;
        while (std::getline(ss, tok, ',')) c.hd_dilations.push_back(std::stoi(tok));
        c.block_count = std::stoi(want("block_count"));
        std::sscanf(want("block_kernel").c_str(), "%dx%d", &c.block_kernel_t, &c.block_kernel_f);
        std::sscanf(want("block_dilation").c_str(), "%dx%d", &c.block_dilation_t, &c.block_dilation_f);
        c.pool = std::stoi(want("pool"));
        c.n_keys = std::stoi(want("n_keys"));
        c.n_bins = std::stoi(want("n_bins"));
        c.validate();
        return c;
    }
};

namespace detail {

template <typename S>
Tensor<S> init_conv_weight(Rng& rng, int64_t cout, int64_t cin, int64_t kt, int64_t kf) {
    const double bound = 1.0 / std::sqrt(double(cin * kt * kf));
    std::vector<S> w(cout * cin * kt * kf);
    for (auto& v : w) v = static_cast<S>(rng.range(-bound, bound));
    return Tensor<S>::from({cout, cin, kt, kf}, std::move(w), true);
}

template <typename S>
Tensor<S> init_uniform(Rng& rng, Shape shape, double bound) {
    std::vector<S> w(shape_size(shape));
    for (auto& v : w) v = static_cast<S>(rng.range(-bound, bound));
    return Tensor<S>::from(std::move(shape), std::move(w), true);
}

} // namespace detail

template <typename S>
struct ConvLayer {
    Tensor<S> w, b;
    int dil_t = 1, dil_f = 1;
};

template <typename S>
struct NormLayer {
    Tensor<S> gamma, beta;
};

// Shared conv front end: 3x (7x7 conv, ReLU, instance norm), the HD-Conv
// layer, frequency pooling, then block_count x (dilated conv, ReLU, instance
// norm). Output [B, C, T, n_keys].
template <typename S>
struct AcousticModel {
    ModelConfig cfg;
    std::vector<ConvLayer<S>> stack;
    std::vector<NormLayer<S>> stack_norm;
    std::vector<Tensor<S>> hd_w, hd_b;
    std::vector<ConvLayer<S>> blocks;
    std::vector<NormLayer<S>> block_norm;

    void init(const ModelConfig& c, Rng& rng) {
        cfg = c;
        const int F = c.conv_stack_filters, C = c.channels;
        stack.clear(); stack_norm.clear(); hd_w.clear(); hd_b.clear(); blocks.clear(); block_norm.clear();
        for (int i = 0; i < 3; ++i) {
            const int cin = i == 0 ? 1 : F;
            stack.push_back({detail::init_conv_weight<S>(rng, F, cin, 7, 7),
                             Tensor<S>::zeros({F}, true), 1, 1});
            stack_norm.push_back({Tensor<S>::filled({F}, S(1), true), Tensor<S>::zeros({F}, true)});
        }
        for (size_t k = 0; k < c.hd_dilations.size(); ++k) {
            hd_w.push_back(detail::init_conv_weight<S>(rng, C, F, 1, 3));
            hd_b.push_back(Tensor<S>::zeros({C}, true));
        }
        for (int i = 0; i < c.block_count; ++i) {
            blocks.push_back({detail::init_conv_weight<S>(rng, C, C, c.block_kernel_t, c.block_kernel_f),
                              Tensor<S>::zeros({C}, true), c.block_dilation_t, c.block_dilation_f});
            block_norm.push_back({Tensor<S>::filled({C}, S(1), true), Tensor<S>::zeros({C}, true)});
        }
    }

    Tensor<S> forward(const Tensor<S>& input) const {
        if (input.rank() != 4 || input.dim(1) != 1 || input.dim(3) != cfg.n_bins)
            throw DimensionError("acoustic model expects [B,1,T," + std::to_string(cfg.n_bins) +
                                 "], got " + shape_str(input.shape()));
        Tensor<S> x = input;
        for (size_t i = 0; i < stack.size(); ++i) {
            x = conv2d(x, stack[i].w, stack[i].b);
            x = relu(x);
            x = instance_norm(x, stack_norm[i].gamma, stack_norm[i].beta);
        }
        x = hd_conv(x, hd_w, hd_b, cfg.hd_dilations);
        x = max_pool_freq(x, cfg.pool);
        for (size_t i = 0; i < blocks.size(); ++i) {
            x = conv2d(x, blocks[i].w, blocks[i].b, blocks[i].dil_t, blocks[i].dil_f);
            x = relu(x);
            x = instance_norm(x, block_norm[i].gamma, block_norm[i].beta);
        }
        return x; // [B, C, T, n_keys]
    }

    void collect(const std::string& prefix, std::vector<Parameter<S>>& out) {
        for (size_t i = 0; i < stack.size(); ++i) {
            out.push_back({prefix + ".conv" + std::to_string(i) + ".w", stack[i].w});
            out.push_back({prefix + ".conv" + std::to_string(i) + ".b", stack[i].b});
            out.push_back({prefix + ".norm" + std::to_string(i) + ".gamma", stack_norm[i].gamma});
            out.push_back({prefix + ".norm" + std::to_string(i) + ".beta", stack_norm[i].beta});
        }
        for (size_t k = 0; k < hd_w.size(); ++k) {
            out.push_back({prefix + ".hd" + std::to_string(k) + ".w", hd_w[k]});
            out.push_back({prefix + ".hd" + std::to_string(k) + ".b", hd_b[k]});
        }
        for (size_t i = 0; i < blocks.size(); ++i) {
            out.push_back({prefix + ".block" + std::to_string(i) + ".conv.w", blocks[i].w});
            out.push_back({prefix + ".block" + std::to_string(i) + ".conv.b", blocks[i].b});
            out.push_back({prefix + ".block" + std::to_string(i) + ".norm.gamma", block_norm[i].gamma});
            out.push_back({prefix + ".block" + std::to_string(i) + ".norm.beta", block_norm[i].beta});
        }
    }
};

// One prediction head: a single biLSTM shared across the 88 frequency groups
// followed by a per-frame linear layer and sigmoid.
template <typename S>
struct FgLstmHead {
    BiLstmParams<S> lstm;
    Tensor<S> out_w, out_b;
    int hidden = 0;

    void init(int in_features, int units, Rng& rng) {
        hidden = units;
        const double bw = 1.0 / std::sqrt(double(units));
        for (auto* d : {&lstm.fwd, &lstm.bwd}) {
            d->w_ih = detail::init_uniform<S>(rng, {in_features, 4 * int64_t(units)}, bw);
            d->w_hh = detail::init_uniform<S>(rng, {int64_t(units), 4 * int64_t(units)}, bw);
            std::vector<S> bias(4 * units, S(0));
            for (int j = 0; j < units; ++j) bias[units + j] = S(1); // forget gate
            d->bias = Tensor<S>::from({4 * int64_t(units)}, std::move(bias), true);
        }
        out_w = detail::init_uniform<S>(rng, {2 * int64_t(units), 1}, 1.0 / std::sqrt(2.0 * units));
        out_b = Tensor<S>::zeros({1}, true);
    }

    // fm [B,C,T,K] -> [B,T,K] in (0,1)
    Tensor<S> forward(const Tensor<S>& fm) const {
        const int64_t B = fm.dim(0), C = fm.dim(1), T = fm.dim(2), K = fm.dim(3);
        Tensor<S> seq = reshape(permute(fm, {0, 3, 2, 1}), {B * K, T, C});
        Tensor<S> h = bilstm_seq(seq, lstm, hidden);
        Tensor<S> y = sigmoid(linear(h, out_w, out_b)); // [B*K, T, 1]
        return permute(reshape(y, {B, K, T}), {0, 2, 1});
    }

    void collect(const std::string& prefix, std::vector<Parameter<S>>& out) {
        const char* dir_names[2] = {"fwd", "bwd"};
        LstmDirectionParams<S>* dirs[2] = {&lstm.fwd, &lstm.bwd};
        for (int d = 0; d < 2; ++d) {
            out.push_back({prefix + ".lstm." + dir_names[d] + ".w_ih", dirs[d]->w_ih});
            out.push_back({prefix + ".lstm." + dir_names[d] + ".w_hh", dirs[d]->w_hh});
            out.push_back({prefix + ".lstm." + dir_names[d] + ".bias", dirs[d]->bias});
        }
        out.push_back({prefix + ".out.w", out_w});
        out.push_back({prefix + ".out.b", out_b});
    }
};

// The four head outputs for a batch, each [B,T,88].
template <typename S>
struct HeadOutputs {
    Tensor<S> onset, frame, offset, velocity;
};

template <typename S>
class HppNet {
public:
    HppNet(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        if (cfg_.variant == Variant::Sp) {
            onset_acoustic_.init(cfg_, rng);
            rest_acoustic_.init(cfg_, rng);
        } else {
            acoustic_.init(cfg_, rng);
        }
        const int head_in = cfg_.variant == Variant::Sp ? 2 * cfg_.channels : cfg_.channels;
        onset_head_.init(cfg_.variant == Variant::Sp ? cfg_.channels : head_in, cfg_.lstm_units, rng);
        frame_head_.init(head_in, cfg_.lstm_units, rng);
        offset_head_.init(head_in, cfg_.lstm_units, rng);
        velocity_head_.init(head_in, cfg_.lstm_units, rng);
    }

    const ModelConfig& config() const { return cfg_; }

    // input [B,1,T,n_bins]
    HeadOutputs<S> forward(const Tensor<S>& input) const {
        HeadOutputs<S> out;
        if (cfg_.variant == Variant::Sp) {
            Tensor<S> fm_on = onset_acoustic_.forward(input);
            Tensor<S> fm_rest = rest_acoustic_.forward(input);
            out.onset = onset_head_.forward(fm_on);
            Tensor<S> joint = concat_channels(fm_rest, fm_on.detach());
            out.frame = frame_head_.forward(joint);
            out.offset = offset_head_.forward(joint);
            out.velocity = velocity_head_.forward(joint);
        } else {
            Tensor<S> fm = acoustic_.forward(input);
            out.onset = onset_head_.forward(fm);
            out.frame = frame_head_.forward(fm);
            out.offset = offset_head_.forward(fm);
            out.velocity = velocity_head_.forward(fm);
        }
        return out;
    }

    std::vector<Parameter<S>> parameters() {
        std::vector<Parameter<S>> out;
        if (cfg_.variant == Variant::Sp) {
            onset_acoustic_.collect("onset_acoustic", out);
            rest_acoustic_.collect("rest_acoustic", out);
        } else {
            acoustic_.collect("acoustic", out);
        }
        onset_head_.collect("onset_head", out);
        frame_head_.collect("frame_head", out);
        offset_head_.collect("offset_head", out);
        velocity_head_.collect("velocity_head", out);
        return out;
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto& p : parameters()) n += p.tensor.size();
        return n;
    }

    AcousticModel<S>& acoustic() { return acoustic_; }
    AcousticModel<S>& onset_acoustic() { return onset_acoustic_; }
    AcousticModel<S>& rest_acoustic() { return rest_acoustic_; }
    FgLstmHead<S>& head(const std::string& name) {
        if (name == "onset") return onset_head_;
        if (name == "frame") return frame_head_;
        if (name == "offset") return offset_head_;
        return velocity_head_;
    }

private:
    ModelConfig cfg_;
    AcousticModel<S> acoustic_;                  // base / tiny
    AcousticModel<S> onset_acoustic_, rest_acoustic_; // sp
    FgLstmHead<S> onset_head_, frame_head_, offset_head_, velocity_head_;
};

// Extract one batch item into the decoder-facing struct.
template <typename S>
Posteriorgram to_posteriorgram(const HeadOutputs<S>& heads, int64_t batch_index) {
    const int64_t T = heads.onset.dim(1), K = heads.onset.dim(2);
    Posteriorgram p;
    p.frames = T;
    auto put = [&](std::vector<float>& dst, const Tensor<S>& src) {
        dst.resize(T * K);
        const S* base = src.data() + batch_index * T * K;
        for (int64_t i = 0; i < T * K; ++i) dst[i] = static_cast<float>(base[i]);
    };
    put(p.onset, heads.onset);
    put(p.frame, heads.frame);
    put(p.offset, heads.offset);
    put(p.velocity, heads.velocity);
    return p;
}

} // namespace hppnet

#endif
