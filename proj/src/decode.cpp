#include "hppnet/decode.hpp"

#include <algorithm>
#include <cmath>

namespace hppnet {

std::vector<NoteEvent> decode(const Posteriorgram& post, double onset_thresh, double frame_thresh) {
    std::vector<NoteEvent> notes;
    const int64_t T = post.frames;
    const double h = post.frame_period;
    for (int key = 0; key < 88; ++key) {
        auto onset_at = [&](int64_t t) { return post.at(post.onset, t, key) >= onset_thresh; };
        auto frame_at = [&](int64_t t) { return post.at(post.frame, t, key) >= frame_thresh; };
        int64_t t = 0;
        while (t < T) {
            const bool rising = onset_at(t) && (t == 0 || !onset_at(t - 1));
            if (!rising) {
                ++t;
                continue;
            }
            const int64_t start = t;
            int64_t end = T;
            bool reonset = false;
            for (int64_t u = start + 1; u < T; ++u) {
                if (onset_at(u) && !onset_at(u - 1)) {
                    end = u;
                    reonset = true;
                    break;
                }
                if (!frame_at(u)) {
                    end = u;
                    break;
                }
            }
            NoteEvent n;
            n.pitch = key + 21;
            n.onset_time = start * h;
            n.offset_time = std::max(end * h, (start + 1) * h);
            n.velocity = std::clamp(static_cast<int>(std::lround(post.at(post.velocity, start, key) * 127.0)), 1, 127);
            notes.push_back(n);
            t = reonset ? end : end + 1;
        }
    }
    std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset_time != b.onset_time ? a.onset_time < b.onset_time : a.pitch < b.pitch;
    });
    return notes;
}

} // namespace hppnet
