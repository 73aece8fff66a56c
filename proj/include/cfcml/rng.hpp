#pragma once
#include <cmath>
#include <cstdint>
#include <string>

namespace cfcml {

// splitmix64; used both as a stream seeder and to derive independent
// substreams from (seed, tag) pairs so generation order never depends on
// call order elsewhere.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t s = seed;
    splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    splitmix64(s);
    s ^= b * 0xc2b2ae3d27d4eb4fULL;
    splitmix64(s);
    s ^= c * 0x165667b19e3779f9ULL;
    splitmix64(s);
    s ^= d * 0x27d4eb2f165667c5ULL;
    return splitmix64(s);
}

// Self-contained generator with fully specified output, so identical seeds
// give identical bytes regardless of the standard library in use.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Box-Muller; one draw consumed per call keeps substream accounting simple
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return next_double() < p; }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    std::string serialize() const { return std::to_string(state_); }
    static RngStream deserialize(const std::string& s) {
        RngStream r;
        r.state_ = std::stoull(s);
        return r;
    }

private:
    std::uint64_t state_;
};

// FNV-1a over bytes; the deterministic hash used for embeddings and digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 14695981039346656037ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

}  // namespace cfcml
