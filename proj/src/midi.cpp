#include "hppnet/midi.hpp"

#include "hppnet/checkpoint.hpp" // IoError / FormatError

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace hppnet {

namespace {

constexpr int kTicksPerQuarter = 480;
constexpr int kTempoUsPerQuarter = 500000; // 120 BPM -> 1 tick = 1/960 s
constexpr double kTicksPerSecond = 960.0;

void put_u16be(std::ostream& os, uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
}
void put_u32be(std::ostream& os, uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_varlen(std::vector<unsigned char>& out, uint32_t v) {
    unsigned char buf[4];
    int n = 0;
    buf[n++] = v & 0x7f;
    while (v >>= 7) buf[n++] = (v & 0x7f) | 0x80;
    while (n--) out.push_back(buf[n]);
}

struct TrackEvent {
    int64_t tick;
    int order; // off-before-on at equal ticks
    unsigned char status, d1, d2;
};

} // namespace

void write_midi(const std::vector<NoteEvent>& notes, const std::string& path) {
    std::vector<TrackEvent> events;
    events.reserve(notes.size() * 2);
    for (const auto& n : notes) {
        const int64_t on = std::llround(n.onset_time * kTicksPerSecond);
        int64_t off = std::llround(n.offset_time * kTicksPerSecond);
        if (off <= on) off = on + 1;
        const auto pitch = static_cast<unsigned char>(std::clamp(n.pitch, 0, 127));
        const auto vel = static_cast<unsigned char>(std::clamp(n.velocity, 1, 127));
        events.push_back({on, 1, 0x90, pitch, vel});
        events.push_back({off, 0, 0x80, pitch, 64});
    }
    std::stable_sort(events.begin(), events.end(), [](const TrackEvent& a, const TrackEvent& b) {
        return a.tick != b.tick ? a.tick < b.tick : a.order < b.order;
    });

    std::vector<unsigned char> track;
    // tempo meta at tick 0
    put_varlen(track, 0);
    for (unsigned char c : {0xff, 0x51, 0x03}) track.push_back(c);
    track.push_back((kTempoUsPerQuarter >> 16) & 0xff);
    track.push_back((kTempoUsPerQuarter >> 8) & 0xff);
    track.push_back(kTempoUsPerQuarter & 0xff);
    int64_t last_tick = 0;
    for (const auto& e : events) {
        put_varlen(track, static_cast<uint32_t>(e.tick - last_tick));
        last_tick = e.tick;
        track.push_back(e.status);
        track.push_back(e.d1);
        track.push_back(e.d2);
    }
    put_varlen(track, 0);
    for (unsigned char c : {0xff, 0x2f, 0x00}) track.push_back(c);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open midi file for writing: " + path);
    os.write("MThd", 4);
    put_u32be(os, 6);
    put_u16be(os, 0); // format 0
    put_u16be(os, 1);
    put_u16be(os, kTicksPerQuarter);
    os.write("MTrk", 4);
    put_u32be(os, static_cast<uint32_t>(track.size()));
    os.write(reinterpret_cast<const char*>(track.data()), static_cast<std::streamsize>(track.size()));
    if (!os) throw IoError("write failure on midi file: " + path);
}

namespace {

struct Cursor {
    const unsigned char* p;
    const unsigned char* end;

    bool done() const { return p >= end; }
    unsigned char byte() {
        if (done()) throw FormatError("midi: truncated track data");
        return *p++;
    }
    uint32_t varlen() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const unsigned char b = byte();
            v = (v << 7) | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw FormatError("midi: variable-length quantity too long");
    }
    void skip(uint32_t n) {
        if (p + n > end) throw FormatError("midi: truncated track data");
        p += n;
    }
};

struct RawEvent {
    int64_t tick;
    int seq; // original order, for stable merge
    unsigned char status, d1, d2;
    uint32_t tempo = 0; // for meta 0x51
};

} // namespace

MidiReadResult read_midi_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open midi file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 14 || std::memcmp(bytes.data(), "MThd", 4) != 0)
        throw FormatError("midi: missing MThd chunk in " + path);
    const auto be16 = [&](size_t o) { return (bytes[o] << 8) | bytes[o + 1]; };
    const auto be32 = [&](size_t o) {
        return (uint32_t(bytes[o]) << 24) | (bytes[o + 1] << 16) | (bytes[o + 2] << 8) | bytes[o + 3];
    };
    const uint32_t hlen = be32(4);
    const int format = be16(8);
    const int ntracks = be16(10);
    const int division = be16(12);
    if (format != 0 && format != 1)
        throw FormatError("midi: unsupported format " + std::to_string(format) + " in " + path);
    if (division & 0x8000) throw FormatError("midi: SMPTE time division unsupported in " + path);

    std::vector<RawEvent> merged;
    size_t pos = 8 + hlen;
    int seq = 0;
    for (int tr = 0; tr < ntracks; ++tr) {
        if (pos + 8 > bytes.size() || std::memcmp(bytes.data() + pos, "MTrk", 4) != 0)
            throw FormatError("midi: missing MTrk chunk " + std::to_string(tr) + " in " + path);
        const uint32_t tlen = be32(pos + 4);
        Cursor c{bytes.data() + pos + 8, bytes.data() + pos + 8 + tlen};
        if (c.end > bytes.data() + bytes.size()) throw FormatError("midi: truncated MTrk chunk in " + path);
        pos += 8 + tlen;

        int64_t tick = 0;
        unsigned char running = 0;
        while (!c.done()) {
            tick += c.varlen();
            unsigned char status = *c.p;
            if (status & 0x80) {
                c.p++;
                if (status < 0xf0) running = status;
            } else {
                if (!(running & 0x80)) throw FormatError("midi: data byte without running status in " + path);
                status = running;
            }
            if (status == 0xff) {
                const unsigned char type = c.byte();
                const uint32_t len = c.varlen();
                if (type == 0x51 && len == 3) {
                    const uint32_t tempo = (uint32_t(c.byte()) << 16) | (c.byte() << 8) | c.byte();
                    merged.push_back({tick, seq++, 0xff, 0x51, 0, tempo});
                } else {
                    c.skip(len);
                    if (type == 0x2f) break;
                }
            } else if (status == 0xf0 || status == 0xf7) {
                c.skip(c.varlen());
            } else {
                const int kind = status & 0xf0;
                const unsigned char d1 = c.byte();
                unsigned char d2 = 0;
                if (kind != 0xc0 && kind != 0xd0) d2 = c.byte();
                if (kind == 0x90 || kind == 0x80) merged.push_back({tick, seq++, status, d1, d2});
            }
        }
    }

    std::stable_sort(merged.begin(), merged.end(), [](const RawEvent& a, const RawEvent& b) {
        return a.tick != b.tick ? a.tick < b.tick : a.seq < b.seq;
    });

    // tick -> seconds with tempo integration
    double us_per_tick = double(kTempoUsPerQuarter) / division;
    int64_t last_tick = 0;
    double last_sec = 0;

    MidiReadResult result;
    // pitch -> open (onset sec, velocity); note-offs pair with the EARLIEST
    // open note so overlapping same-pitch notes round-trip in onset order
    std::map<int, std::vector<std::pair<double, int>>> open;
    for (const auto& e : merged) {
        const double sec = last_sec + double(e.tick - last_tick) * us_per_tick * 1e-6;
        last_tick = e.tick;
        last_sec = sec;
        if (e.status == 0xff) {
            us_per_tick = double(e.tempo) / division;
            continue;
        }
        const int kind = e.status & 0xf0;
        const int pitch = e.d1;
        const bool on = kind == 0x90 && e.d2 > 0;
        if (on) {
            open[pitch].push_back({sec, e.d2});
        } else {
            auto it = open.find(pitch);
            if (it == open.end() || it->second.empty()) continue; // orphan note-off
            const auto [onset, vel] = it->second.front();
            it->second.erase(it->second.begin());
            if (pitch < 21 || pitch > 108) {
                result.dropped_out_of_range++;
                continue;
            }
            NoteEvent n;
            n.pitch = pitch;
            n.onset_time = onset;
            n.offset_time = std::max(sec, onset + 1e-4);
            n.velocity = std::clamp(vel, 1, 127);
            result.notes.push_back(n);
        }
    }
    std::sort(result.notes.begin(), result.notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset_time != b.onset_time ? a.onset_time < b.onset_time : a.pitch < b.pitch;
    });
    return result;
}

} // namespace hppnet
