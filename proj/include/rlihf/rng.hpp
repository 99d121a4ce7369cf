#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rlihf {

using Rng = std::mt19937_64;

/// Child seed for a labelled component stream ("env", "agent", "channel", "eval", ...).
/// Changing how one component consumes randomness never perturbs another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

inline Rng make_stream(std::uint64_t master, std::string_view label) {
    return Rng(derive_seed(master, label));
}

/// Uniform in [0, 1).
inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace rlihf
