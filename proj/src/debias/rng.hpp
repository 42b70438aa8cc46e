#pragma once

#include <cstdint>
#include <random>

namespace debias {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

//! Child seed for an independent stream. Streams derived from distinct
//! (seed, stream) pairs never depend on scheduling, which is what makes
//! parallel replicates and trials reproduce the sequential result.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Stream tags used inside one simulation trial.
namespace stream_tag {
inline constexpr std::uint64_t data = 0x64617461ULL;
inline constexpr std::uint64_t cv = 0x6376ULL;
inline constexpr std::uint64_t bootstrap = 0x626f6f74ULL;
}  // namespace stream_tag

}  // namespace debias
