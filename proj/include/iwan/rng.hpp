#pragma once

#include <cstdint>
#include <random>

namespace iwan {

using Rng = std::mt19937_64;

/// Independent stream derived from a root seed and a (purpose, index) pair.
/// A run uses one root seed and derives every per-iteration stream from it,
/// so resuming at iteration j only needs j.
inline Rng make_stream(std::uint64_t root, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(purpose >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Purposes for make_stream.
namespace stream {
inline constexpr std::uint64_t interior = 1;
inline constexpr std::uint64_t boundary = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t grid = 5;
inline constexpr std::uint64_t initial_slab = 6;
}  // namespace stream

}  // namespace iwan
