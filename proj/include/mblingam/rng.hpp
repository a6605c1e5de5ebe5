#pragma once

#include <cstdint>
#include <random>

#include "mblingam/normal.hpp"

namespace mblingam::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; the fixed mixing function behind all seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return splitmix64(base); }

// Folds tags into the base seed one at a time. A seed derived from
// (master, d, q) depends only on those values, never on thread schedule.
template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Rest... rest) {
    return derive_seed(splitmix64(base ^ (tag + kGolden)), rest...);
}

// Stream tags used across the library so independent consumers of the same
// base seed never collide.
namespace tag {
inline constexpr std::uint64_t resample = 0x01;
inline constexpr std::uint64_t ica = 0x02;
inline constexpr std::uint64_t restart = 0x03;
inline constexpr std::uint64_t dataset = 0x04;
inline constexpr std::uint64_t noise = 0x05;
inline constexpr std::uint64_t replicate = 0x06;
}  // namespace tag

// mt19937_64 with hand-rolled variate transforms. The standard fully pins the
// engine's output sequence; std::uniform_*_distribution does not, so the
// transforms live here to keep results identical across toolchains.
class Engine {
public:
    explicit Engine(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1); safe as input to quantile functions.
    double uniform_open01() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform index in [0, n) via 128-bit multiply-shift.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    double normal() { return normal_quantile(uniform_open01()); }

    // Laplace(0, b) by inverse CDF; variance is 2*b^2.
    double laplace(double scale_b) {
        const double q = uniform_open01() - 0.5;
        const double mag = -scale_b * std::log1p(-2.0 * std::abs(q));
        return q < 0.0 ? -mag : mag;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mblingam::rng
