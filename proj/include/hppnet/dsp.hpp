#ifndef HPPNET_DSP_HPP
#define HPPNET_DSP_HPP

#include "hppnet/checkpoint.hpp" // IoError / FormatError

#include <cstdint>
#include <string>
#include <vector>

namespace hppnet {

struct AudioClip {
    std::vector<float> samples; // mono, [-1, 1]
    int sample_rate = 16000;

    double seconds() const { return samples.empty() ? 0.0 : double(samples.size()) / sample_rate; }
};

struct CqtConfig {
    double f_min = 27.5;
    int bins_per_octave = 48;
    int n_bins = 352;
    int hop = 320;
    int sample_rate = 16000;

    double bin_frequency(int b) const { return f_min * std::pow(2.0, double(b) / bins_per_octave); }
};

struct Spectrogram {
    int64_t frames = 0;
    int n_bins = 352;
    double frame_period = 0.02;
    CqtConfig config;
    std::vector<float> values; // frames x n_bins, row-major log10 magnitudes

    float at(int64_t t, int b) const { return values[t * n_bins + b]; }
};

// RIFF/WAVE, PCM 16-bit or IEEE float 32-bit, 1-2 channels. Stereo is
// averaged to mono; integer samples scale by 1/32768.
AudioClip read_wav(const std::string& path);

// 16-bit PCM writer for the synth command.
void write_wav(const AudioClip& clip, const std::string& path);

// Windowed-sinc (Kaiser beta 8.6, 64 taps per phase) polyphase resampling.
// Output length = round(len * target / source); the 16 kHz -> 16 kHz path is
// an exact copy.
AudioClip resample(const AudioClip& clip, int target_rate = 16000);

// Direct time-domain CQT: per frame center t*hop and bin b, correlate a
// Hann-windowed complex exponential of length ceil(Q_factor*fs/f_b) with the
// zero-padded signal; value = log10(|coef|/N_b + 1e-5).
class CqtTransform {
public:
    explicit CqtTransform(CqtConfig cfg = {});
    Spectrogram apply(const AudioClip& clip) const;
    const CqtConfig& config() const { return cfg_; }

private:
    CqtConfig cfg_;
    std::vector<float> kernel_data_; // interleaved re/im, windowed, per bin
    std::vector<int64_t> kernel_offset_, kernel_len_;
};

Spectrogram cqt(const AudioClip& clip, const CqtConfig& cfg = {});

// Bin distance between a fundamental and its k-th harmonic on a grid of Q
// bins per octave: round(Q * log2(k)).
int harmonic_offset(int k, int q);

constexpr double kLogFloor = -5.0; // log10(1e-5), value of silence

} // namespace hppnet

#endif
