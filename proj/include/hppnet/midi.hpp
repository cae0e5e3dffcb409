#ifndef HPPNET_MIDI_HPP
#define HPPNET_MIDI_HPP

#include "hppnet/decode.hpp"

namespace hppnet {

struct MidiReadResult {
    std::vector<NoteEvent> notes;
    int dropped_out_of_range = 0; // notes outside keys 21..108
};

// SMF format 0 or 1. Tracks are merged, the tempo map is honored, note-on
// with velocity 0 counts as note-off.
MidiReadResult read_midi_file(const std::string& path);

inline std::vector<NoteEvent> read_midi(const std::string& path) {
    return read_midi_file(path).notes;
}

} // namespace hppnet

#endif
