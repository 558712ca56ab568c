#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace semihoc {

using Rng = std::mt19937_64;

/// Independent RNG streams derived from a single run seed.
enum class Stream : std::uint32_t {
  kDatagen = 1,
  kInit = 2,
  kDropout = 3,
  kShuffle = 4,
  kLabeledSubset = 5,
  kOracle = 6,
};

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint32_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), sub};
  return Rng(seq);
}

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace semihoc
