#pragma once

#include <cstdint>
#include <random>

namespace phasetopo {

/// Portable uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
/// The standard distributions are implementation defined, this is not.
inline double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_double(rng); }

}  // namespace phasetopo
