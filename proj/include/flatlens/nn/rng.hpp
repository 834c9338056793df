#pragma once

#include <cstdint>

namespace flatlens {

// Independent child seed for (stream, index); lets per-sample randomness be
// drawn in any order with identical results.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ stream) ^ index);
}

namespace seed_stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t train_mask = 2;
inline constexpr std::uint64_t gradient_mask = 3;
inline constexpr std::uint64_t direction = 4;
inline constexpr std::uint64_t probe_mask = 5;
}  // namespace seed_stream

}  // namespace flatlens
