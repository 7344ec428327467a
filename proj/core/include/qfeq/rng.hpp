#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qfeq {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derive a child seed from a parent seed and a path of stream labels.
/// Every random consumer in the library receives its own derived seed; there
/// is no global generator.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept;

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

// Stream labels, kept stable so that datasets stay byte-identical across versions.
namespace stream {
inline constexpr std::uint64_t kBits = 0x62697473;
inline constexpr std::uint64_t kTxLaser = 0x74786c61;
inline constexpr std::uint64_t kRxLaser = 0x72786c61;
inline constexpr std::uint64_t kEdfa = 0x65646661;
inline constexpr std::uint64_t kTransceiver = 0x7472780a;
inline constexpr std::uint64_t kInit = 0x696e6974;
inline constexpr std::uint64_t kShuffle = 0x73687566;
inline constexpr std::uint64_t kTrainSet = 0x74726e73;
}  // namespace stream

}  // namespace qfeq
