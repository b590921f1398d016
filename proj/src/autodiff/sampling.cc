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

#include "diffabm/autodiff/sampling.h"

#include <cmath>
#include <string>
#include <vector>

#include "diffabm/autodiff/ops.h"
#include "diffabm/errors.h"

namespace diffabm::ad {
namespace {

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor GumbelSoftmaxBernoulli(const Tensor& p, double temperature, Rng& rng,
                              bool hard) {
  if (!(temperature > 0.0)) {
    throw DomainError("gumbel_softmax_bernoulli: temperature must be > 0");
  }
  const auto pv = p.values();
  const std::size_t n = pv.size();
  for (double v : pv) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("gumbel_softmax_bernoulli: probability " +
                        std::to_string(v) + " outside [0, 1]");
    }
  }
  std::vector<double> noise(n);
  for (double& l : noise) l = rng.Logistic();

  std::vector<double> relaxed(n);
  std::vector<double> hard_values(hard ? n : 0);
  kernels::parallel::For(n, [&](std::size_t i) {
    const double q = pv[i];
    if (q <= 0.0) {
      relaxed[i] = 0.0;
    } else if (q >= 1.0) {
      relaxed[i] = 1.0;
    } else {
      relaxed[i] = Sigmoid((std::log(q) - std::log1p(-q) + noise[i]) /
                           temperature);
    }
    if (hard) {
      const bool on = q >= 1.0 ||
                      (q > 0.0 && std::log(q) - std::log1p(-q) + noise[i] > 0.0);
      hard_values[i] = on ? 1.0 : 0.0;
    }
  });

  if (!p.requires_grad()) {
    return Tensor::Constant(hard ? std::move(hard_values) : std::move(relaxed),
                            p.shape());
  }

  // dz/dp = z (1 - z) / (temperature p (1 - p)) on (0, 1); zero at the ends,
  // where the relaxed sample is pinned.
  Tensor z = Tape::Record(
      OpKind::kRelaxedBernoulli, p.shape(), relaxed, {&p},
      [p, relaxed, temperature](BackwardContext& ctx) {
        const auto g = ctx.grad_output();
        const auto pv = p.values();
        auto gp = ctx.grad_input(0);
        kernels::parallel::For(gp.size(), [&](std::size_t i) {
          const double q = pv[i];
          if (q <= 0.0 || q >= 1.0) return;
          const double z = relaxed[i];
          gp[i] += g[i] * z * (1.0 - z) / (temperature * q * (1.0 - q));
        });
      });
  if (!hard) return z;
  return StraightThrough(z, std::move(hard_values));
}

}  // namespace diffabm::ad
