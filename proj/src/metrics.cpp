#include "hppnet/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace hppnet {

namespace {

// Kuhn's augmenting-path maximum bipartite matching. Candidate edges are
// visited in (ref index, est index) order, which fixes tie handling.
class Matcher {
public:
    Matcher(size_t n_ref, std::vector<std::vector<int>> adj)
        : adj_(std::move(adj)), match_ref_(n_ref, -1) {}

    int solve(size_t n_est) {
        match_est_.assign(n_est, -1);
        int matched = 0;
        for (size_t r = 0; r < adj_.size(); ++r) {
            seen_.assign(n_est, false);
            if (augment(static_cast<int>(r))) ++matched;
        }
        return matched;
    }

private:
    bool augment(int r) {
        for (int e : adj_[r]) {
            if (seen_[e]) continue;
            seen_[e] = true;
            if (match_est_[e] == -1 || augment(match_est_[e])) {
                match_est_[e] = r;
                match_ref_[r] = e;
                return true;
            }
        }
        return false;
    }

    std::vector<std::vector<int>> adj_;
    std::vector<int> match_ref_, match_est_;
    std::vector<char> seen_;
};

} // namespace

Score note_score(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                 double onset_tol, bool with_offset, double offset_ratio) {
    if (ref.empty() && est.empty()) return {1.0, 1.0, 1.0};
    if (ref.empty() || est.empty()) return {0.0, 0.0, 0.0};

    std::vector<std::vector<int>> adj(ref.size());
    for (size_t r = 0; r < ref.size(); ++r) {
        for (size_t e = 0; e < est.size(); ++e) {
            if (ref[r].pitch != est[e].pitch) continue;
            if (std::abs(ref[r].onset_time - est[e].onset_time) > onset_tol) continue;
            if (with_offset) {
                const double dur = ref[r].offset_time - ref[r].onset_time;
                const double tol = std::max(onset_tol, offset_ratio * dur);
                if (std::abs(ref[r].offset_time - est[e].offset_time) > tol) continue;
            }
            adj[r].push_back(static_cast<int>(e));
        }
    }
    const int matched = Matcher(ref.size(), std::move(adj)).solve(est.size());
    Score s;
    s.precision = double(matched) / double(est.size());
    s.recall = double(matched) / double(ref.size());
    s.f1 = f_measure(s.precision, s.recall);
    return s;
}

Score frame_score(const std::vector<uint8_t>& ref_roll, const std::vector<uint8_t>& est_roll) {
    if (ref_roll.size() != est_roll.size())
        throw std::invalid_argument("frame_score: roll sizes differ");
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < ref_roll.size(); ++i) {
        const bool r = ref_roll[i] != 0, e = est_roll[i] != 0;
        tp += r && e;
        fp += !r && e;
        fn += r && !e;
    }
    if (tp + fp + fn == 0) return {1.0, 1.0, 1.0};
    Score s;
    s.precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    s.recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    s.f1 = f_measure(s.precision, s.recall);
    return s;
}

std::string scores_json(const Score& note, const Score& note_with_offset, const Score& frame) {
    nlohmann::json j;
    auto put = [&](const char* key, const Score& s) {
        j[key] = {{"p", s.precision}, {"r", s.recall}, {"f1", s.f1}};
    };
    put("note", note);
    put("note_with_offset", note_with_offset);
    put("frame", frame);
    return j.dump();
}

} // namespace hppnet
