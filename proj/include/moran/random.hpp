#ifndef MORAN_RANDOM_HPP
#define MORAN_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace moran {

using Rng = std::mt19937_64;

/// Independent stream for one replicate. The split rule is fixed: the engine is
/// seeded from seed_seq{seed lo, seed hi, replicate lo, replicate hi}.
inline Rng replicate_stream(std::uint64_t master_seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32)};
  return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on {0, ..., n-1}.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

/// Exponential waiting time by inversion.
inline double exponential(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

}  // namespace moran

#endif  // MORAN_RANDOM_HPP
