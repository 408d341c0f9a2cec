#pragma once

#include <cstdint>

// Counter-based random streams. Every draw is addressed by
// (seed, rep, purpose, index), so results do not depend on execution
// order or thread count.

namespace mpd::rng {

// Stream purposes. Waves use kWaveBase + k.
inline constexpr std::uint64_t kResample = 0;
inline constexpr std::uint64_t kWaveBase = 1;           // wave k -> kWaveBase + k
inline constexpr std::uint64_t kBaselineWave = 200;
inline constexpr std::uint64_t kDgpBase = 300;          // synthetic DGP slots

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t stream(std::uint64_t seed, std::uint64_t rep,
                            std::uint64_t purpose, std::uint64_t index) {
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ splitmix(rep));
    h = splitmix(h ^ splitmix(purpose));
    h = splitmix(h ^ splitmix(index));
    return h;
}

// Uniform in [0,1).
inline double uniform(std::uint64_t seed, std::uint64_t rep,
                      std::uint64_t purpose, std::uint64_t index) {
    return static_cast<double>(stream(seed, rep, purpose, index) >> 11) * 0x1.0p-53;
}

// Uniform in the open interval (0,1); safe input for inverse CDFs.
inline double uniform_open(std::uint64_t seed, std::uint64_t rep,
                           std::uint64_t purpose, std::uint64_t index) {
    return (static_cast<double>(stream(seed, rep, purpose, index) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace mpd::rng
