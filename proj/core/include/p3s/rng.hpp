#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace p3s {

// splitmix64 finalizer; good avalanche, used for seeding and stream derivation.
inline std::uint64_t hash_mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Derives an independent stream seed from (master, tag, a, b). Streams are
// keyed by purpose + loop indices so replays sample identically regardless
// of how much randomness other components consumed.
inline std::uint64_t derive_stream(std::uint64_t master, std::uint64_t tag,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = hash_mix(master + 0x9e3779b97f4a7c15ULL);
    s = hash_mix(s ^ hash_mix(tag + 0xbf58476d1ce4e5b9ULL));
    s = hash_mix(s ^ hash_mix(a + 0x94d049bb133111ebULL));
    s = hash_mix(s ^ hash_mix(b + 0xd1b54a32d192ed03ULL));
    return s;
}

// Stream tags. Values are arbitrary but frozen: changing them changes replays.
namespace stream {
inline constexpr std::uint64_t kFolds = 1;
inline constexpr std::uint64_t kEval = 2;
inline constexpr std::uint64_t kLearnerFold = 3;
inline constexpr std::uint64_t kAutoencoder = 4;
inline constexpr std::uint64_t kKMeans = 5;
inline constexpr std::uint64_t kPolicyInit = 6;
inline constexpr std::uint64_t kAssignment = 7;
inline constexpr std::uint64_t kTrial = 8;
inline constexpr std::uint64_t kForestTree = 9;
}  // namespace stream

// xoshiro256++ with portable helpers. std::uniform_*_distribution is not
// pinned by the standard, so all draws go through hand-rolled code to keep
// runs byte-reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            word = hash_mix(s);
        }
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased uniform index in [0, n); n must be > 0.
    std::size_t next_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r = next();
        while (r >= limit) r = next();
        return static_cast<std::size_t>(r % bound);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace p3s
