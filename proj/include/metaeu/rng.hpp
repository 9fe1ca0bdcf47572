#pragma once
// Deterministic pseudo-random source: xoshiro256** seeded through splitmix64.
// All sampling in the project goes through this type so that runs are
// bit-identical for a fixed seed regardless of platform or standard library.
// Do not use <random> distributions anywhere; their outputs are not portable.

#include <cstdint>
#include <cmath>
#include <vector>

namespace metaeu {

class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        // splitmix64 expansion of the seed into the xoshiro state
        uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    // Derive an independent stream, e.g. per task: Rng(seed).fork(task_index)
    Rng fork(uint64_t stream) const {
        Rng r(0);
        r.state_[0] = state_[0] ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        r.state_[1] = state_[1] + 0xbf58476d1ce4e5b9ULL * (stream + 1);
        r.state_[2] = state_[2] ^ (0x94d049bb133111ebULL + stream);
        r.state_[3] = state_[3] + stream;
        // mix a few rounds so nearby streams decorrelate
        for (int i = 0; i < 8; ++i) r.next_u64();
        return r;
    }

    uint64_t next_u64() {
        uint64_t* s = state_;
        uint64_t result = rotl(s[1] * 5, 7) * 9;
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Uniform index in [0, n). n must be > 0.
    size_t uniform_index(size_t n) {
        // rejection sampling to avoid modulo bias
        uint64_t bound = ~uint64_t{0} - (~uint64_t{0} % n + 1) % n;
        uint64_t v;
        do {
            v = next_u64();
        } while (v > bound && bound != ~uint64_t{0});
        return static_cast<size_t>(v % n);
    }

    // Uniform double in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Deterministic Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

} // namespace metaeu
