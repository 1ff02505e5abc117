#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cftim {

// SplitMix64; used only to derive substream seeds from the master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// One RNG per run, partitioned into named substreams so adding a consumer
/// does not perturb another consumer's draw sequence.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t master_seed) : master_seed_(master_seed) {}

    std::mt19937_64 make(std::string_view name) const {
        return std::mt19937_64(splitmix64(master_seed_ ^ fnv1a64(name)));
    }

    std::uint64_t master_seed() const { return master_seed_; }

private:
    std::uint64_t master_seed_;
};

}  // namespace cftim
