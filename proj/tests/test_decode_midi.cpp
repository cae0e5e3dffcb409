#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hppnet/data.hpp"
#include "hppnet/midi.hpp"
#include "hppnet/rng.hpp"

#include <cstdio>

using namespace hppnet;

namespace {

Posteriorgram blank(int64_t frames) {
    Posteriorgram p;
    p.frames = frames;
    p.onset.assign(frames * 88, 0.0f);
    p.frame.assign(frames * 88, 0.0f);
    p.offset.assign(frames * 88, 0.0f);
    p.velocity.assign(frames * 88, 0.0f);
    return p;
}

void set_row(std::vector<float>& m, int key, std::vector<float> vals) {
    for (size_t t = 0; t < vals.size(); ++t) m[t * 88 + key] = vals[t];
}

} // namespace

TEST_CASE("decode worked examples") {
    SUBCASE("single note") {
        auto p = blank(4);
        set_row(p.onset, 39, {0, 1, 0, 0}); // key 39 = pitch 60
        set_row(p.frame, 39, {0, 1, 1, 0});
        set_row(p.velocity, 39, {0, 0.5f, 0, 0});
        auto notes = decode(p);
        REQUIRE(notes.size() == 1);
        CHECK(notes[0].pitch == 60);
        CHECK(notes[0].onset_time == doctest::Approx(0.02));
        CHECK(notes[0].offset_time == doctest::Approx(0.06));
        CHECK(notes[0].velocity == 64);
    }
    SUBCASE("frame activity without onset produces nothing") {
        auto p = blank(6);
        set_row(p.frame, 20, {1, 1, 1, 1, 1, 1});
        CHECK(decode(p).empty());
    }
    SUBCASE("re-onset splits the note") {
        auto p = blank(7);
        set_row(p.onset, 10, {0, 1, 0, 1, 0, 0, 0});
        set_row(p.frame, 10, {0, 1, 1, 1, 1, 1, 0});
        set_row(p.velocity, 10, {0, 0.9f, 0, 0.3f, 0, 0, 0});
        auto notes = decode(p);
        REQUIRE(notes.size() == 2);
        CHECK(notes[0].onset_time == doctest::Approx(0.02));
        CHECK(notes[0].offset_time == doctest::Approx(0.06));
        CHECK(notes[1].onset_time == doctest::Approx(0.06));
        CHECK(notes[1].offset_time == doctest::Approx(0.12));
        CHECK(notes[0].velocity == 114); // round(0.9 * 127)
        CHECK(notes[1].velocity == 38);  // round(0.3 * 127)
    }
    SUBCASE("minimum length is one frame") {
        auto p = blank(3);
        set_row(p.onset, 5, {1, 0, 0});
        // frame never reaches threshold: still one 1-frame note
        auto notes = decode(p);
        REQUIRE(notes.size() == 1);
        CHECK(notes[0].offset_time == doctest::Approx(0.02));
        CHECK(notes[0].offset_time > notes[0].onset_time);
    }
    SUBCASE("velocity clamps to [1,127]") {
        auto p = blank(2);
        set_row(p.onset, 0, {1, 0});
        set_row(p.frame, 0, {1, 0});
        set_row(p.velocity, 0, {0.0f, 0});
        CHECK(decode(p)[0].velocity == 1);
        set_row(p.velocity, 0, {1.0f, 0});
        CHECK(decode(p)[0].velocity == 127);
    }
    SUBCASE("every onset frame has onset posterior at or above threshold") {
        Rng rng(4);
        auto p = blank(40);
        for (auto* m : {&p.onset, &p.frame, &p.velocity})
            for (auto& x : *m) x = float(rng.uniform());
        for (const auto& n : decode(p)) {
            const int64_t t = int64_t(std::llround(n.onset_time / 0.02));
            CHECK(p.at(p.onset, t, n.pitch - 21) >= 0.4f);
        }
    }
    SUBCASE("raising frame threshold never lengthens a note") {
        Rng rng(8);
        auto p = blank(60);
        for (auto* m : {&p.onset, &p.frame, &p.velocity})
            for (auto& x : *m) x = float(rng.uniform());
        auto lo = decode(p, 0.4, 0.3), hi = decode(p, 0.4, 0.6);
        // same onsets both ways; durations can only shrink
        REQUIRE(lo.size() == hi.size());
        for (size_t i = 0; i < lo.size(); ++i) {
            CHECK(lo[i].onset_time == hi[i].onset_time);
            CHECK(hi[i].offset_time <= lo[i].offset_time + 1e-12);
        }
    }
}

TEST_CASE("midi round trips") {
    SUBCASE("empty list") {
        write_midi({}, "empty.mid");
        CHECK(read_midi("empty.mid").empty());
    }
    SUBCASE("one note round-trips exactly") {
        std::vector<NoteEvent> notes{{60, 0.0, 1.0, 64}};
        write_midi(notes, "one.mid");
        auto back = read_midi("one.mid");
        REQUIRE(back.size() == 1);
        CHECK(back[0].pitch == 60);
        CHECK(back[0].velocity == 64);
        CHECK(back[0].onset_time == doctest::Approx(0.0));
        CHECK(back[0].offset_time == doctest::Approx(1.0));
    }
    SUBCASE("100 random notes within one tick") {
        Rng rng(17);
        std::vector<NoteEvent> notes;
        while (notes.size() < 100) {
            NoteEvent n;
            n.pitch = rng.range_int(21, 108);
            n.onset_time = rng.range(0.0, 18.0);
            n.offset_time = n.onset_time + rng.range(0.05, 2.0);
            n.velocity = rng.range_int(1, 127);
            // same-pitch overlap is ambiguous in SMF; keep pitches monophonic
            bool clear = true;
            for (const auto& o : notes)
                if (o.pitch == n.pitch && n.onset_time < o.offset_time && o.onset_time < n.offset_time)
                    clear = false;
            if (clear) notes.push_back(n);
        }
        std::sort(notes.begin(), notes.end(),
                  [](const NoteEvent& a, const NoteEvent& b) { return a.onset_time < b.onset_time; });
        write_midi(notes, "hundred.mid");
        auto back = read_midi("hundred.mid");
        REQUIRE(back.size() == notes.size());
        const double tick = 1.0 / 960.0;
        for (size_t i = 0; i < notes.size(); ++i) {
            CHECK(back[i].pitch == notes[i].pitch);
            CHECK(back[i].velocity == notes[i].velocity);
            CHECK(std::abs(back[i].onset_time - notes[i].onset_time) <= tick + 1e-9);
            CHECK(std::abs(back[i].offset_time - notes[i].offset_time) <= tick + 1e-9);
        }
    }
    SUBCASE("note-on velocity zero acts as note-off") {
        // hand-built format-0 file: note-on, then note-on vel 0 after 960 ticks
        std::FILE* f = std::fopen("velzero.mid", "wb");
        const uint8_t header[] = {'M','T','h','d',0,0,0,6, 0,0, 0,1, 0x01,0xE0};
        const uint8_t track[] = {'M','T','r','k',0,0,0,13,
                                 0x00, 0x90, 60, 80,
                                 0x87, 0x40, 0x90, 60, 0, // delta 960, vel 0
                                 0x00, 0xFF, 0x2F, 0x00};
        std::fwrite(header, 1, sizeof header, f);
        std::fwrite(track, 1, sizeof track, f);
        std::fclose(f);
        auto back = read_midi("velzero.mid");
        REQUIRE(back.size() == 1);
        CHECK(back[0].pitch == 60);
        CHECK(back[0].offset_time == doctest::Approx(1.0)); // 960 ticks at 120 BPM
    }
    SUBCASE("tempo change mid-note integrates both tempi") {
        // 480 tpq. Note on at 0. After 480 ticks (0.5 s at 120 BPM) tempo
        // drops to 60 BPM; note off 480 ticks later (now 1.0 s). Total 1.5 s.
        std::FILE* f = std::fopen("tempochange.mid", "wb");
        const uint8_t header[] = {'M','T','h','d',0,0,0,6, 0,0, 0,1, 0x01,0xE0};
        const uint8_t track[] = {'M','T','r','k',0,0,0,21,
                                 0x00, 0x90, 60, 100,
                                 0x83, 0x60, 0xFF, 0x51, 3, 0x0F, 0x42, 0x40, // delta 480, tempo 1e6
                                 0x83, 0x60, 0x80, 60, 0, // delta 480, note off
                                 0x00, 0xFF, 0x2F, 0x00};
        std::fwrite(header, 1, sizeof header, f);
        std::fwrite(track, 1, sizeof track, f);
        std::fclose(f);
        auto back = read_midi("tempochange.mid");
        REQUIRE(back.size() == 1);
        CHECK(back[0].onset_time == doctest::Approx(0.0));
        CHECK(back[0].offset_time == doctest::Approx(1.5));
    }
    SUBCASE("out-of-range notes counted and dropped") {
        std::vector<NoteEvent> notes{{60, 0.0, 0.5, 64}};
        write_midi(notes, "range.mid");
        auto res = read_midi_file("range.mid");
        CHECK(res.dropped_out_of_range == 0);
        // pitch 10 is below the keyboard
        std::vector<NoteEvent> bad{{10, 0.0, 0.5, 64}, {60, 0.0, 0.5, 64}};
        write_midi(bad, "range2.mid");
        auto res2 = read_midi_file("range2.mid");
        CHECK(res2.notes.size() == 1);
        CHECK(res2.dropped_out_of_range == 1);
    }
    SUBCASE("garbage file raises FormatError") {
        std::FILE* f = std::fopen("garbage.mid", "wb");
        std::fwrite("NOTMIDI!", 1, 8, f);
        std::fclose(f);
        CHECK_THROWS_AS(read_midi("garbage.mid"), FormatError);
    }
}
