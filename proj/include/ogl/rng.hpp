//
// Copyright 2026 The ogl-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef OGL_RNG_HPP_
#define OGL_RNG_HPP_

#include <cstdint>
#include <random>

namespace ogl {

// Every random draw in the simulator comes from a stream keyed by
// (master seed, purpose, a, b, c). Streams never share state, so the order in
// which groups or workers are processed cannot change any draw.
enum class Purpose : std::uint64_t {
  kSyntheticMeans = 1,
  kSyntheticPoints = 2,
  kSplit = 3,
  kPartition = 4,
  kSample = 5,
  kNoise = 6,
  kTrain = 7,
};

using Rng = std::mt19937_64;

inline constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based key derivation: each field is folded through SplitMix64 so
// that nearby keys (t and t+1, say) produce unrelated seeds.
inline constexpr std::uint64_t DeriveSeed(std::uint64_t master, Purpose purpose,
                                          std::uint64_t a = 0,
                                          std::uint64_t b = 0,
                                          std::uint64_t c = 0) {
  std::uint64_t h = SplitMix64(master);
  h = SplitMix64(h ^ static_cast<std::uint64_t>(purpose));
  h = SplitMix64(h ^ a);
  h = SplitMix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = SplitMix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline Rng MakeStream(std::uint64_t master, Purpose purpose,
                      std::uint64_t a = 0, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
  return Rng(DeriveSeed(master, purpose, a, b, c));
}

}  // namespace ogl

#endif  // OGL_RNG_HPP_
