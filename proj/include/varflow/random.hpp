// Copyright 2026 The Varflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARFLOW_RANDOM_HPP_
#define VARFLOW_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace varflow {

using Rng = std::mt19937_64;

// Named sub-streams derived from a single user seed, so each source of
// randomness can be perturbed without shifting the others.
enum class Stream : std::uint64_t {
  kData = 1,
  kTimes = 2,
  kNoise = 3,
  kThinning = 4,
  kInit = 5,
  kBatch = 6,
  kOracle = 7,
  kDropout = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  s = splitmix64(s ^ index);
  return Rng(s);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace varflow

#endif  // VARFLOW_RANDOM_HPP_
