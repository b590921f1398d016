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

#include <cmath>
#include <vector>

#include "diffabm/autodiff/ops.h"
#include "diffabm/autodiff/sampling.h"
#include "diffabm/errors.h"
#include "doctest.h"
#include "gradcheck.h"

namespace diffabm::ad {
namespace {

TEST_CASE("impossible and certain events") {
  for (double temperature : {0.1, 0.5, 2.0}) {
    Rng rng(3);
    Tensor zeros = GumbelSoftmaxBernoulli(Tensor::Full({1000}, 0.0),
                                          temperature, rng, false);
    Tensor ones = GumbelSoftmaxBernoulli(Tensor::Full({1000}, 1.0),
                                         temperature, rng, false);
    for (double v : zeros.values()) CHECK(v == 0.0);
    for (double v : ones.values()) CHECK(v == 1.0);
  }
}

TEST_CASE("hard samples are exact Bernoulli draws") {
  Rng rng(2024);
  Tensor draws =
      GumbelSoftmaxBernoulli(Tensor::Full({10000}, 0.3), 0.5, rng, true);
  double total = 0.0;
  for (double v : draws.values()) {
    CHECK((v == 0.0 || v == 1.0));
    total += v;
  }
  // 3-sigma band: sigma = sqrt(0.3 * 0.7 / 10000).
  const double mean = total / 10000.0;
  CHECK(mean >= 0.286);
  CHECK(mean <= 0.314);
}

TEST_CASE("relaxed samples lie in (0, 1)") {
  Rng rng(9);
  Tensor z = GumbelSoftmaxBernoulli(Tensor::Full({5000}, 0.4), 0.5, rng, false);
  for (double v : z.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("relaxed gradient matches finite differences under frozen noise") {
  const std::vector<double> p{0.05, 0.3, 0.5, 0.81, 0.97};
  auto sample = [](const Tensor& probs) {
    Rng rng(77);
    return GumbelSoftmaxBernoulli(probs, 0.5, rng, false);
  };
  Tape tape;
  Tensor leaf = tape.Leaf(p);
  const Tensor weights = Tensor::Constant({1.0, -2.0, 0.5, 3.0, 1.5});
  const auto analytic =
      tape.Backward(Sum(sample(leaf) * weights))(leaf);
  const auto numeric = testing::CentralDifference(
      [&](const std::vector<double>& x) {
        return Sum(sample(Tensor::Constant(x)) * weights).item();
      },
      p, 1e-6);
  CHECK(testing::MaxRelativeError(analytic, numeric, 1e-6) < 1e-5);
}

TEST_CASE("straight-through uses the relaxed gradient") {
  const std::vector<double> p{0.2, 0.6, 0.9};
  Tape relaxed_tape;
  Tape hard_tape;
  Rng a(5);
  Rng b(5);
  Tensor pr = relaxed_tape.Leaf(p);
  Tensor ph = hard_tape.Leaf(p);
  Tensor zr = GumbelSoftmaxBernoulli(pr, 0.5, a, false);
  Tensor zh = GumbelSoftmaxBernoulli(ph, 0.5, b, true);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK((zh[i] == 0.0 || zh[i] == 1.0));
    CHECK(zh[i] == (zr[i] > 0.5 ? 1.0 : 0.0));
  }
  CHECK(relaxed_tape.Backward(Sum(zr))(pr) == hard_tape.Backward(Sum(zh))(ph));
}

TEST_CASE("same seed gives the same sample") {
  Rng a(42);
  Rng b(42);
  Tensor p = Tensor::Full({100}, 0.37);
  Tensor x = GumbelSoftmaxBernoulli(p, 0.5, a, false);
  Tensor y = GumbelSoftmaxBernoulli(p, 0.5, b, false);
  CHECK(std::vector<double>(x.values().begin(), x.values().end()) ==
        std::vector<double>(y.values().begin(), y.values().end()));
}

TEST_CASE("sampler domain errors") {
  Rng rng(1);
  CHECK_THROWS_AS(
      GumbelSoftmaxBernoulli(Tensor::Constant({1.2}), 0.5, rng, false),
      DomainError);
  CHECK_THROWS_AS(
      GumbelSoftmaxBernoulli(Tensor::Constant({-0.1}), 0.5, rng, false),
      DomainError);
  CHECK_THROWS_AS(
      GumbelSoftmaxBernoulli(Tensor::Constant({0.5}), 0.0, rng, false),
      DomainError);
}

}  // namespace
}  // namespace diffabm::ad
