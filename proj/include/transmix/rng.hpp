#ifndef TRANSMIX_RNG_HPP
#define TRANSMIX_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace transmix {

/// Random engine used throughout. mt19937_64 is bit-exact across conforming
/// standard libraries; all distributions come from Boost.Random, whose
/// algorithms are fixed in source, so streams are reproducible everywhere.
using Rng = std::mt19937_64;

/// Engine for the stream identified by (seed, path...). Each path element is a
/// stream index (replicate, restart, order k, ...). std::seed_seq is fully
/// specified by the standard, so derived streams are portable.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32) ^ 0x9e3779b9u);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Seed of a child stream, for APIs that take a plain integer seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  Rng rng = make_rng(seed, path);
  return rng();
}

}  // namespace transmix

#endif  // TRANSMIX_RNG_HPP
