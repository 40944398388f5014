#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace omnivl {

// Deterministic RNG. std::mt19937_64's raw output sequence is fully
// specified by the standard; the distribution helpers below are written
// out by hand because std::*_distribution is implementation-defined and
// we require bit-identical runs across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Box-Muller, no cached spare (keeps the stream position obvious).
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent sub-stream, e.g. Rng(seed).fork("vlm", step).
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ull + b;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static uint64_t hash_str(const char* s) {
        uint64_t h = 1469598103934665603ull;
        for (; *s; ++s) h = (h ^ static_cast<uint8_t>(*s)) * 1099511628211ull;
        return h;
    }

private:
    std::mt19937_64 eng_;
};

inline Rng subseed_rng(uint64_t seed, const char* tag, uint64_t k = 0) {
    return Rng(Rng::mix(Rng::mix(seed, Rng::hash_str(tag)), k));
}

}  // namespace omnivl
