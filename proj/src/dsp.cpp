#include "hppnet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hppnet {

namespace {

uint32_t read_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24);
}
uint16_t read_u16le(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
void write_u32le(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<char*>(b), 4);
}
void write_u16le(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

} // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open wav file: " + path);
    char tag[5] = {0};
    is.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0) throw FormatError("wav: missing RIFF chunk in " + path);
    read_u32le(is);
    is.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0) throw FormatError("wav: missing WAVE form in " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<char> payload;
    bool have_fmt = false, have_data = false;
    while (is.read(tag, 4)) {
        const uint32_t len = read_u32le(is);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16le(is);
            channels = read_u16le(is);
            rate = read_u32le(is);
            read_u32le(is); // byte rate
            read_u16le(is); // block align
            bits = read_u16le(is);
            if (len > 16) is.seekg(len - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            payload.resize(len);
            is.read(payload.data(), len);
            have_data = true;
        } else {
            is.seekg(len + (len & 1), std::ios::cur);
        }
    }
    if (!have_fmt) throw FormatError("wav: missing chunk 'fmt ' in " + path);
    if (!have_data) throw FormatError("wav: missing chunk 'data' in " + path);
    if (channels < 1 || channels > 2)
        throw FormatError("wav: unsupported channel count " + std::to_string(channels) + " in " + path);

    const bool pcm16 = format == 1 && bits == 16;
    const bool f32 = format == 3 && bits == 32;
    if (!pcm16 && !f32)
        throw FormatError("wav: unsupported codec (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bit) in chunk 'fmt ' of " + path);

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    const size_t bytes_per = (bits / 8) * channels;
    const size_t n = payload.size() / bytes_per;
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        float acc = 0;
        for (int c = 0; c < channels; ++c) {
            if (pcm16) {
                int16_t v;
                std::memcpy(&v, payload.data() + (i * channels + c) * 2, 2);
                acc += float(v) / 32768.0f;
            } else {
                float v;
                std::memcpy(&v, payload.data() + (i * channels + c) * 4, 4);
                acc += v;
            }
        }
        clip.samples[i] = acc / float(channels);
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open wav file for writing: " + path);
    const uint32_t data_len = static_cast<uint32_t>(clip.samples.size() * 2);
    os.write("RIFF", 4);
    write_u32le(os, 36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    write_u32le(os, 16);
    write_u16le(os, 1); // PCM
    write_u16le(os, 1); // mono
    write_u32le(os, static_cast<uint32_t>(clip.sample_rate));
    write_u32le(os, static_cast<uint32_t>(clip.sample_rate) * 2);
    write_u16le(os, 2);
    write_u16le(os, 16);
    os.write("data", 4);
    write_u32le(os, data_len);
    for (float s : clip.samples) {
        const int v = std::clamp(static_cast<int>(std::lround(s * 32767.0f)), -32768, 32767);
        write_u16le(os, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    if (!os) throw IoError("write failure on wav file: " + path);
}

namespace {

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (double(k) * k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

constexpr int kTapsPerPhase = 64;
constexpr int kPhases = 512;
constexpr double kKaiserBeta = 8.6;

// Oversampled windowed-sinc table; phase interpolated linearly at runtime.
struct SincTable {
    std::vector<double> taps; // (kPhases + 1) x kTapsPerPhase
    double cutoff;            // relative to source Nyquist

    explicit SincTable(double ratio) {
        cutoff = std::min(1.0, ratio) * 0.92;
        const double i0_beta = bessel_i0(kKaiserBeta);
        const int half = kTapsPerPhase / 2;
        taps.resize((kPhases + 1) * kTapsPerPhase);
        for (int p = 0; p <= kPhases; ++p) {
            const double frac = double(p) / kPhases;
            double sum = 0;
            for (int k = 0; k < kTapsPerPhase; ++k) {
                const double t = k - half + 1 - frac; // source-sample offset
                const double x = t / half;
                double w = 0;
                if (std::abs(x) <= 1.0) w = bessel_i0(kKaiserBeta * std::sqrt(1.0 - x * x)) / i0_beta;
                const double arg = M_PI * cutoff * t;
                const double s = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
                taps[p * kTapsPerPhase + k] = cutoff * s * w;
                sum += taps[p * kTapsPerPhase + k];
            }
            // Unit DC gain at every phase.
            for (int k = 0; k < kTapsPerPhase; ++k) taps[p * kTapsPerPhase + k] /= sum;
        }
    }
};

} // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.sample_rate < 8000)
        throw FormatError("resample: source rate " + std::to_string(clip.sample_rate) + " below 8 kHz");
    if (clip.sample_rate == target_rate) return clip;

    const double ratio = double(target_rate) / clip.sample_rate;
    const SincTable table(ratio);
    const int half = kTapsPerPhase / 2;
    const size_t out_len = static_cast<size_t>(std::llround(double(clip.samples.size()) * ratio));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    const int64_t n_in = static_cast<int64_t>(clip.samples.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(out_len); ++i) {
        const double src_pos = double(i) / ratio;
        const int64_t base = static_cast<int64_t>(std::floor(src_pos));
        const double frac = src_pos - base;
        const double fp = frac * kPhases;
        const int p0 = static_cast<int>(fp);
        const double pf = fp - p0;
        const double* t0 = table.taps.data() + p0 * kTapsPerPhase;
        const double* t1 = table.taps.data() + (p0 + 1) * kTapsPerPhase;
        double acc = 0;
        for (int k = 0; k < kTapsPerPhase; ++k) {
            const int64_t src = base + k - half + 1;
            if (src < 0 || src >= n_in) continue;
            acc += clip.samples[src] * (t0[k] + pf * (t1[k] - t0[k]));
        }
        out.samples[i] = static_cast<float>(acc);
    }
    return out;
}

CqtTransform::CqtTransform(CqtConfig cfg) : cfg_(cfg) {
    const double q_factor = 1.0 / (std::pow(2.0, 1.0 / cfg_.bins_per_octave) - 1.0);
    kernel_offset_.resize(cfg_.n_bins + 1, 0);
    kernel_len_.resize(cfg_.n_bins, 0);
    for (int b = 0; b < cfg_.n_bins; ++b) {
        const double fb = cfg_.bin_frequency(b);
        kernel_len_[b] = static_cast<int64_t>(std::ceil(q_factor * cfg_.sample_rate / fb));
        kernel_offset_[b + 1] = kernel_offset_[b] + kernel_len_[b];
    }
    kernel_data_.resize(kernel_offset_[cfg_.n_bins] * 2);
#pragma omp parallel for schedule(dynamic)
    for (int b = 0; b < cfg_.n_bins; ++b) {
        const int64_t n = kernel_len_[b];
        const double fb = cfg_.bin_frequency(b);
        float* dst = kernel_data_.data() + kernel_offset_[b] * 2;
        for (int64_t i = 0; i < n; ++i) {
            const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
            const double phase = -2.0 * M_PI * fb * double(i - n / 2) / cfg_.sample_rate;
            dst[i * 2] = static_cast<float>(hann * std::cos(phase));
            dst[i * 2 + 1] = static_cast<float>(hann * std::sin(phase));
        }
    }
}

Spectrogram CqtTransform::apply(const AudioClip& clip) const {
    if (clip.sample_rate != cfg_.sample_rate)
        throw FormatError("cqt: clip must be at " + std::to_string(cfg_.sample_rate) + " Hz, got " +
                          std::to_string(clip.sample_rate));
    const int64_t T = static_cast<int64_t>(clip.samples.size()) / cfg_.hop;
    if (T < 1) throw FormatError("cqt: clip shorter than one hop, empty spectrogram");

    Spectrogram spec;
    spec.frames = T;
    spec.n_bins = cfg_.n_bins;
    spec.frame_period = double(cfg_.hop) / cfg_.sample_rate;
    spec.config = cfg_;
    spec.values.resize(T * cfg_.n_bins);

    const int64_t n_samples = static_cast<int64_t>(clip.samples.size());
    const float* x = clip.samples.data();
#pragma omp parallel for schedule(dynamic)
    for (int64_t t = 0; t < T; ++t) {
        const int64_t center = t * cfg_.hop;
        for (int b = 0; b < cfg_.n_bins; ++b) {
            const int64_t n = kernel_len_[b];
            const int64_t start = center - n / 2;
            const float* k = kernel_data_.data() + kernel_offset_[b] * 2;
            const int64_t lo = std::max<int64_t>(0, -start);
            const int64_t hi = std::min<int64_t>(n, n_samples - start);
            double re = 0, im = 0;
            for (int64_t i = lo; i < hi; ++i) {
                const double s = x[start + i];
                re += s * k[i * 2];
                im += s * k[i * 2 + 1];
            }
            const double mag = std::sqrt(re * re + im * im) / double(n);
            spec.values[t * cfg_.n_bins + b] = static_cast<float>(std::log10(mag + 1e-5));
        }
    }
    return spec;
}

Spectrogram cqt(const AudioClip& clip, const CqtConfig& cfg) {
    return CqtTransform(cfg).apply(clip);
}

int harmonic_offset(int k, int q) {
    if (k < 1) throw std::domain_error("harmonic_offset: harmonic index must be >= 1");
    return static_cast<int>(std::lround(q * std::log2(double(k))));
}

} // namespace hppnet
