#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "vldg/core.hpp"

namespace vldg {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic random stream. Self-contained distributions so the same
/// (seed) produces the same draws on any compiler.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in [0, n). Multiply-shift bound; bias is negligible for n << 2^64.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw Error("RngStream::next_below: n must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform integer in [lo, hi] inclusive.
    long long uniform_int(long long lo, long long hi) {
        if (hi < lo) throw Error("RngStream::uniform_int: empty range");
        return lo + static_cast<long long>(next_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Standard normal, Box-Muller with one cached value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

/// Seed for a named consumer stream. Pure in (trial_seed, consumer_tag).
inline std::uint64_t derive_seed(std::uint64_t trial_seed, std::string_view consumer_tag) {
    if (consumer_tag.empty()) throw ConfigError("derive_rng: consumer tag must be nonempty");
    return trial_seed * 0x9e3779b97f4a7c15ull ^ fnv1a64(consumer_tag);
}

/// Deterministic per-consumer stream: same (seed, tag) -> identical draws,
/// different tag or seed -> independent stream.
inline RngStream derive_rng(std::uint64_t trial_seed, std::string_view consumer_tag) {
    return RngStream(derive_seed(trial_seed, consumer_tag));
}

}  // namespace vldg
