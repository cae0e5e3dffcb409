#ifndef HPPNET_RNG_HPP
#define HPPNET_RNG_HPP

#include <cstdint>
#include <random>

namespace hppnet {

// mt19937 with hand-rolled mappings; std distributions are not bit-portable
// across standard libraries and every run here must be reproducible from the
// seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    uint32_t next_u32() { return gen_(); }

    // uniform in [0,1)
    double uniform() { return gen_() * (1.0 / 4294967296.0); }

    double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi] inclusive
    int range_int(int lo, int hi) {
        const uint32_t span = static_cast<uint32_t>(hi - lo + 1);
        return lo + static_cast<int>(gen_() % span);
    }

private:
    std::mt19937 gen_;
};

} // namespace hppnet

#endif
