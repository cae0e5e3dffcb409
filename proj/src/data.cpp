#include "hppnet/data.hpp"

#include "hppnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hppnet {

PianoRollTargets make_targets(const std::vector<NoteEvent>& notes, int64_t frames,
                              double frame_period) {
    PianoRollTargets t;
    t.frames = frames;
    t.n.assign(frames * 88, 0);
    t.f.assign(frames * 88, 0);
    t.o.assign(frames * 88, 0);
    t.v.assign(frames * 88, 0.0f);

    const double h = frame_period;
    const double clip_end = frames * h;
    const double onset_window = 2 * h;
    // frames whose center t*h lies in [lo, hi)
    auto frame_range = [&](double lo, double hi, int64_t& first, int64_t& last) {
        first = static_cast<int64_t>(std::ceil(lo / h - 1e-9));
        last = static_cast<int64_t>(std::ceil(hi / h - 1e-9)); // exclusive
        first = std::clamp<int64_t>(first, 0, frames);
        last = std::clamp<int64_t>(last, 0, frames);
    };

    for (const auto& note : notes) {
        if (note.pitch < 21 || note.pitch > 108) continue;
        const int key = note.pitch - 21;
        const double onset = note.onset_time;
        const double offset = std::min(note.offset_time, clip_end);
        if (onset >= clip_end) continue;

        int64_t f0, f1;
        frame_range(onset, offset, f0, f1);
        if (f0 >= f1) {
            // Note shorter than the gap between frame centers: claim the
            // containing frame.
            f0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(onset / h)), 0, frames - 1);
            f1 = f0 + 1;
        }
        for (int64_t fr = f0; fr < f1; ++fr) t.f[fr * 88 + key] = 1;

        int64_t n0, n1;
        frame_range(onset, std::min(onset + onset_window, offset), n0, n1);
        if (n0 >= n1) {
            n0 = f0;
            n1 = f0 + 1;
        }
        for (int64_t fr = n0; fr < n1; ++fr) {
            t.n[fr * 88 + key] = 1;
            t.v[fr * 88 + key] = static_cast<float>(std::clamp(note.velocity, 1, 127) / 127.0);
        }

        int64_t o0, o1;
        frame_range(offset, offset + onset_window, o0, o1);
        for (int64_t fr = o0; fr < o1; ++fr) t.o[fr * 88 + key] = 1;
    }
    return t;
}

AudioClip synth_clip(const std::vector<NoteEvent>& notes, uint64_t seed, double clip_seconds) {
    constexpr int kRate = 16000;
    constexpr int kHarmonics = 8;
    constexpr double kAttack = 0.005, kRelease = 0.010, kDecayTau = 0.4;

    AudioClip clip;
    clip.sample_rate = kRate;
    clip.samples.assign(static_cast<size_t>(std::llround(clip_seconds * kRate)), 0.0f);
    const int64_t n_total = static_cast<int64_t>(clip.samples.size());

    Rng rng(seed);
    for (const auto& note : notes) {
        const double f0 = 440.0 * std::pow(2.0, (note.pitch - 69) / 12.0);
        const double amp = std::clamp(note.velocity, 1, 127) / 127.0;
        double phases[kHarmonics];
        for (auto& p : phases) p = rng.range(0.0, 2.0 * M_PI);

        const int64_t s0 = std::clamp<int64_t>(std::llround(note.onset_time * kRate), 0, n_total);
        const int64_t s_off = std::clamp<int64_t>(std::llround(note.offset_time * kRate), s0, n_total);
        const int64_t s1 = std::min<int64_t>(s_off + std::llround(kRelease * kRate), n_total);
        for (int64_t s = s0; s < s1; ++s) {
            const double tn = double(s - s0) / kRate;
            double env = std::exp(-tn / kDecayTau);
            if (tn < kAttack) env *= tn / kAttack;
            if (s >= s_off) env *= 1.0 - double(s - s_off) / (kRelease * kRate);
            double v = 0;
            for (int k = 1; k <= kHarmonics; ++k) {
                const double fk = k * f0;
                if (fk >= kRate / 2.0) break;
                v += amp * std::pow(double(k), -1.5) *
                     std::sin(2.0 * M_PI * fk * tn + phases[k - 1]);
            }
            clip.samples[s] += static_cast<float>(env * v);
        }
    }

    float peak = 0;
    for (float s : clip.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0) {
        const float g = 0.9f / peak;
        for (auto& s : clip.samples) s *= g;
    }
    return clip;
}

std::vector<Sample> make_dataset(int n_clips, int notes_per_clip, uint64_t seed,
                                 double clip_seconds) {
    std::vector<Sample> samples(n_clips);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_clips; ++i) {
        Rng rng(seed * 1000003ull + i);
        std::vector<NoteEvent> notes;
        for (int k = 0; k < notes_per_clip; ++k) {
            for (int attempt = 0; attempt < 40; ++attempt) {
                const double max_onset = std::max(0.0, clip_seconds - 1.0);
                // onsets on the frame grid so ideal rolls decode back exactly
                const double onset = 0.02 * rng.range_int(0, static_cast<int>(max_onset / 0.02));
                const double dur = rng.range(0.1, 1.0);
                const double offset = std::min(onset + dur, clip_seconds);
                const int pitch = rng.range_int(36, 84);
                // per-pitch gap >= 2 frames on both sides
                bool clash = false;
                int poly = 0;
                for (const auto& n : notes) {
                    if (n.pitch == pitch && onset < n.offset_time + 0.04 && n.onset_time < offset + 0.04)
                        clash = true;
                    if (onset < n.offset_time && n.onset_time < offset) ++poly;
                }
                if (clash || poly >= 4) continue;
                NoteEvent n;
                n.pitch = pitch;
                n.onset_time = onset;
                n.offset_time = offset;
                n.velocity = rng.range_int(40, 120);
                notes.push_back(n);
                break;
            }
        }
        std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
            return a.onset_time != b.onset_time ? a.onset_time < b.onset_time : a.pitch < b.pitch;
        });
        Sample s;
        s.audio = synth_clip(notes, seed * 7919ull + i, clip_seconds);
        const int64_t frames = static_cast<int64_t>(s.audio.samples.size()) / 320;
        s.targets = make_targets(notes, frames);
        s.notes = std::move(notes);
        s.source_id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);
        samples[i] = std::move(s);
    }
    return samples;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestEntry e;
        if (!std::getline(ss, e.path_audio, ',') || !std::getline(ss, e.path_midi, ',') ||
            !std::getline(ss, e.split, ','))
            throw FormatError("manifest: bad line: " + line);
        if (first && e.path_audio == "path_audio") {
            first = false;
            continue; // header row
        }
        first = false;
        if (e.split != "train" && e.split != "validation" && e.split != "test")
            throw FormatError("manifest: unknown split '" + e.split + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest: " + path);
    os << "path_audio,path_midi,split\n";
    for (const auto& e : entries) os << e.path_audio << "," << e.path_midi << "," << e.split << "\n";
}

Sample load_pair(const std::string& wav_path, const std::string& midi_path) {
    Sample s;
    s.audio = resample(read_wav(wav_path), 16000);
    s.notes = read_midi(midi_path);
    const int64_t frames = static_cast<int64_t>(s.audio.samples.size()) / 320;
    s.targets = make_targets(s.notes, frames);
    s.source_id = wav_path;
    return s;
}

} // namespace hppnet
