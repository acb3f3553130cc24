// Deterministic seed derivation: every random stream in the pipeline is a
// mt19937_64 seeded from the root seed and a stage label, so a single root
// seed reproduces every artifact.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aio {

/// Mixes the root seed with a label (and an optional index) into a child seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t index = 0);

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view label,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, label, index));
}

}  // namespace aio
