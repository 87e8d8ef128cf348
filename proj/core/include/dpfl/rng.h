//
// Copyright 2026 The dpfl-lab Authors
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

#ifndef DPFL_RNG_H_
#define DPFL_RNG_H_

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace dpfl {

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t Mix64(std::uint64_t x);

// Derives a seed from a parent seed and a sequence of integer keys. The
// derivation is a fixed function so that (seed, keys) names one stream on
// every platform.
std::uint64_t DeriveSeed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

// Same, keyed by a label such as "partition" or "noise".
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view label,
                         std::initializer_list<std::uint64_t> keys = {});

// Deterministic random source.
//
// Only the raw 64-bit output of std::mt19937_64 is used, which the standard
// pins down exactly. The distributions layered on top are implemented here
// rather than taken from <random>, whose distribution algorithms are
// implementation-defined:
//   Uniform01  top 53 bits of one engine draw, scaled to [0, 1)
//   Gaussian   Marsaglia polar method (pairs cached)
//   Gamma      Marsaglia-Tsang squeeze method, with the alpha < 1 boost
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  double Gaussian();
  double Gamma(double shape);
  // One draw from Dirichlet(alpha * 1_k).
  std::vector<double> Dirichlet(double alpha, std::size_t k);

  template <typename It>
  void Shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = UniformInt(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpfl

#endif  // DPFL_RNG_H_
