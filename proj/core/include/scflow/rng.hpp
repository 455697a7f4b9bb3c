#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace scflow {

using Rng = std::mt19937_64;

/// Stream tags keep independent random streams apart when they share a seed.
enum class Stream : std::uint64_t {
  kFactors = 0x11,
  kEntangler = 0x12,
  kGridNoise = 0x13,
  kSplit = 0x14,
  kNetInit = 0x21,
  kTrainStep = 0x31,
  kHeldout = 0x32,
  kEval = 0x41,
};

/// Deterministic engine for (seed, stream, counters...). Training uses the
/// global step as a counter, so a run can resume from any stored step.
inline Rng derive_rng(std::uint64_t seed, Stream stream,
                      std::initializer_list<std::uint64_t> counters = {}) {
  std::vector<std::uint32_t> words;
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  push(static_cast<std::uint64_t>(stream));
  for (auto c : counters) push(c);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace scflow
