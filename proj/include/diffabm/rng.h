// Copyright 2026 The diffabm Authors
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

#ifndef DIFFABM_RNG_H_
#define DIFFABM_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

namespace diffabm {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under `master`. Stream k does not depend on how many
// other streams exist.
inline std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t index) {
  return Mix64(Mix64(master) ^ Mix64(index + 0x632be59bd9b4e019ULL));
}

// A seeded random stream. All randomness in the library is drawn through this
// type so that draws are reproducible bit-for-bit on a given platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(Mix64(seed)) {}

  // Uniform on the open interval (0, 1).
  double Uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  bool Bernoulli(double p) { return Uniform() < p; }
  // Standard logistic variate, i.e. the difference of two Gumbel draws.
  double Logistic() {
    const double u = Uniform();
    return std::log(u) - std::log1p(-u);
  }
  // Uniform integer in [0, n).
  std::uint64_t Index(std::uint64_t n) {
    return static_cast<std::uint64_t>(Uniform() * static_cast<double>(n)) %
           n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace diffabm

#endif  // DIFFABM_RNG_H_
