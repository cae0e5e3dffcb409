#ifndef HPPNET_DATA_HPP
#define HPPNET_DATA_HPP

#include "hppnet/decode.hpp"
#include "hppnet/dsp.hpp"
#include "hppnet/midi.hpp"

#include <optional>

namespace hppnet {

// Ground-truth rolls: n (onset), f (frame), o (offset) binary; v real in
// [0,1], nonzero only where n = 1. All T x 88 row-major.
struct PianoRollTargets {
    int64_t frames = 0;
    std::vector<uint8_t> n, f, o;
    std::vector<float> v;
};

// Frame t counts as active when its center t*frame_period lies inside the
// window. Onset/offset windows are 2 frames (40 ms); a note too short to
// cover any frame center still claims its containing frame.
PianoRollTargets make_targets(const std::vector<NoteEvent>& notes, int64_t frames,
                              double frame_period = 0.02);

// Additive synthesis at 16 kHz: 8 harmonics with 1/k^1.5 rolloff, 5 ms
// attack, 0.4 s exponential decay, 10 ms release, mixed and peak-normalized
// to 0.9.
AudioClip synth_clip(const std::vector<NoteEvent>& notes, uint64_t seed, double clip_seconds = 20.0);

struct Sample {
    AudioClip audio;
    PianoRollTargets targets;
    std::vector<NoteEvent> notes;
    std::string source_id;
    std::optional<Spectrogram> spectrogram; // computed lazily

    const Spectrogram& ensure_spectrogram(const CqtTransform& transform) {
        if (!spectrogram) spectrogram = transform.apply(audio);
        return *spectrogram;
    }
};

// Deterministic pseudo-random clips: pitches 36..84, durations 0.1..1.0 s,
// velocities 40..120, polyphony <= 4, per-pitch gaps >= 2 frames. Onsets land
// on the 20 ms frame grid.
std::vector<Sample> make_dataset(int n_clips, int notes_per_clip, uint64_t seed,
                                 double clip_seconds = 20.0);

// CSV manifest: path_audio,path_midi,split with split in {train, validation, test}.
struct ManifestEntry {
    std::string path_audio, path_midi, split;
};
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

// Loads a (wav, midi) pair from disk into a sample; audio is resampled to
// 16 kHz and targets are built at the clip's frame count.
Sample load_pair(const std::string& wav_path, const std::string& midi_path);

} // namespace hppnet

#endif
