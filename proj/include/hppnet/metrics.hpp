#ifndef HPPNET_METRICS_HPP
#define HPPNET_METRICS_HPP

#include "hppnet/decode.hpp"

namespace hppnet {

struct Score {
    double precision = 0, recall = 0, f1 = 0;
};

inline double f_measure(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

// mir_eval-style note matching: pitches must be equal, onsets within
// onset_tol, and with with_offset also offsets within
// max(onset_tol, offset_ratio * ref duration). Scored by maximum bipartite
// matching over compatible pairs. Empty ref and empty est scores 1.
Score note_score(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                 double onset_tol = 0.05, bool with_offset = false, double offset_ratio = 0.2);

// Cell-wise precision/recall over T x 88 binary rolls.
Score frame_score(const std::vector<uint8_t>& ref_roll, const std::vector<uint8_t>& est_roll);

// {"note":{"p":..,"r":..,"f1":..},"note_with_offset":{...},"frame":{...}}
std::string scores_json(const Score& note, const Score& note_with_offset, const Score& frame);

} // namespace hppnet

#endif
