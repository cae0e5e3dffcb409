#ifndef HPPNET_DECODE_HPP
#define HPPNET_DECODE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace hppnet {

// A transcribed (or ground-truth) note.
struct NoteEvent {
    int pitch = 0;          // MIDI number, 21..108
    double onset_time = 0;  // seconds
    double offset_time = 0; // seconds, > onset_time
    int velocity = 64;      // 1..127
};

// Per-head probability matrices, T x 88 row-major, one batch item.
struct Posteriorgram {
    int64_t frames = 0;
    double frame_period = 0.02;
    std::vector<float> onset, frame, offset, velocity;

    float at(const std::vector<float>& m, int64_t t, int key) const { return m[t * 88 + key]; }
};

// Onsets & Frames style decoding: a note starts on a rising onset edge,
// sustains while the frame activation stays at or above threshold, and ends
// on frame dropout or on a new rising onset edge (which starts the next
// note). Frame activity with no initiating onset produces nothing. The
// offset head is not consulted.
std::vector<NoteEvent> decode(const Posteriorgram& post, double onset_thresh = 0.4,
                              double frame_thresh = 0.4);

// Standard MIDI File format 0, single track, 480 ticks per quarter at a fixed
// 120 BPM (1 tick = 1/960 s).
void write_midi(const std::vector<NoteEvent>& notes, const std::string& path);

} // namespace hppnet

#endif
