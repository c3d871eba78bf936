#pragma once

#include <cstdint>
#include <random>

namespace lsfts {

// Seed splitting rule: every random stream is keyed by (master seed, stream
// id, index) and seeded with
//   splitmix64(splitmix64(master ^ splitmix64(stream)) + index).
// Streams are independent of how many values another stream consumed, so the
// matrices of a preset do not move when the simulation length changes.
namespace stream {
inline constexpr std::uint64_t matrices = 0x6d61747269636573ULL;
inline constexpr std::uint64_t innovations = 0x696e6e6f76617469ULL;
inline constexpr std::uint64_t replication = 0x7265706c69636174ULL;
}  // namespace stream

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(stream_id)) + index);
}

using Rng = std::mt19937_64;

}  // namespace lsfts
