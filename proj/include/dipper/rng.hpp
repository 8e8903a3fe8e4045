#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dipper {

using Engine = std::mt19937_64;

/// Engine for an independent substream identified by (seed, stream ids...).
inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace dipper
