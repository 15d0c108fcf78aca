#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace sddlab {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream). Streams with distinct indices are
// decorrelated through std::seed_seq; the mapping is fixed so results do not
// depend on how work is split across threads.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5dd1abu};
  return Rng(seq);
}

// Mixes a tag into a seed to derive a child seed (per grid point, per model, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Monte Carlo work is cut into fixed-size chunks, each with its own substream.
inline constexpr std::size_t kChunkSize = 8192;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

// Caps the number of OpenMP workers; 0 restores the runtime default.
void set_worker_limit(int workers);
int worker_limit();

}  // namespace sddlab
