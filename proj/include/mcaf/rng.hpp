#ifndef MCAF_RNG_HPP
#define MCAF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mcaf {

// Deterministic 64-bit generator (splitmix64). Streams can be split off by
// label so that independent consumers never share a sequence; every source of
// randomness in the library goes through this class.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    // Derive an independent stream keyed by (current state, label).
    Rng split(std::string_view label) const {
        uint64_t h = 1469598103934665603ull; // FNV-1a
        for (char ch : label) {
            h ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
            h *= 1099511628211ull;
        }
        uint64_t s = state_ ^ h;
        // one mixing round so that split("a").split("b") != split("ab")
        s += 0x9e3779b97f4a7c15ull;
        return Rng(mix(s));
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    // Standard normal via Box-Muller (no cached spare, so the stream is a pure
    // function of the call count).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

} // namespace mcaf

#endif
