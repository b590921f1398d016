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

#include "diffabm/autodiff/special.h"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "diffabm/errors.h"

namespace diffabm::ad {
namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,   -1259.1392167224028,
    771.32342877765313,      -176.61502916214059, 12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6,
    1.5056327351493116e-7};

void CheckPositive(double x, const char* fn) {
  if (!(x > 0.0)) {
    throw DomainError(std::string(fn) + " requires x > 0, got " +
                      std::to_string(x));
  }
}

double LanczosLogGamma(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double a = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    a += kLanczos[i] / (z + static_cast<double>(i));
  }
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) -
         t + std::log(a);
}

}  // namespace

double LogGamma(double x) {
  CheckPositive(x, "lgamma");
  if (x < 0.5) return LanczosLogGamma(x + 1.0) - std::log(x);
  return LanczosLogGamma(x);
}

double Digamma(double x) {
  CheckPositive(x, "digamma");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number tail: -B_2n / (2n x^2n), n = 1..7, Horner in 1/x^2.
  const double series =
      inv2 *
      (-1.0 / 12.0 +
       inv2 * (1.0 / 120.0 +
               inv2 * (-1.0 / 252.0 +
                       inv2 * (1.0 / 240.0 +
                               inv2 * (-1.0 / 132.0 +
                                       inv2 * (691.0 / 32760.0 +
                                               inv2 * (-1.0 / 12.0)))))));
  return result + std::log(x) - 0.5 * inv + series;
}

}  // namespace diffabm::ad
