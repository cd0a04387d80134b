#pragma once
// Deterministic randomness. Seeds alone do not pin an algorithm, so the
// generator is spelled out exactly (see README "Determinism") and every draw
// the harness makes goes through it:
//
//   state' = 6364136223846793005 * state + 1442695040888963407   (mod 2^64)
//   next_below(n) = (state' >> 32) % n
//
// Identical seeds give identical draw sequences on every platform.

#include <cstdint>
#include <string_view>
#include <vector>

namespace qshift {

class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return state_;
    }

    // Uniform in [0, n); n must be positive. Uses the high 32 bits.
    std::uint64_t next_below(std::uint64_t n) { return (next() >> 32) % n; }

    // Uniform double in [0, 1), 53-bit resolution. Test-fixture helper.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// FNV-1a, used to derive per-instance streams from (seed, instance id).
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// First min(k, n) entries of a Fisher-Yates partial shuffle of [0, n): a draw
// of k distinct indices without replacement, a pure function of (seed, n, k).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                           std::size_t k,
                                                           std::uint64_t seed) {
    if (k > n) k = n;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Lcg64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace qshift
