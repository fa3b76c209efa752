#pragma once

#include <cstdint>
#include <random>

namespace cointel {

/// SplitMix64 finalizer; used to turn (root seed, stream index) pairs into
/// well-separated generator seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream `index` under `root`: the root XOR the index, fed through
/// the seed function. Every per-path / per-step generator is derived this way.
constexpr std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return splitmix64(root ^ index);
}

/// Standard-normal and uniform draws from a 64-bit Mersenne Twister.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace cointel
