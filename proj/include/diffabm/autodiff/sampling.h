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

#ifndef DIFFABM_AUTODIFF_SAMPLING_H_
#define DIFFABM_AUTODIFF_SAMPLING_H_

#include "diffabm/autodiff/tensor.h"
#include "diffabm/rng.h"

namespace diffabm::ad {

inline constexpr double kDefaultTemperature = 0.5;

// Binary Gumbel-Softmax (relaxed Bernoulli) draw for every entry of `p`:
//   z = sigmoid((logit(p) + L) / temperature),  L ~ Logistic(0, 1).
// Exactly one logistic variate is consumed per entry regardless of values,
// so a fixed rng state gives fixed noise. p = 0 and p = 1 yield exactly 0
// and 1. With `hard`, the forward value is 1[logit(p) + L > 0], which is an
// exact Bernoulli(p) draw, and gradients flow through the relaxed z.
// DomainError if any p is outside [0, 1] or temperature <= 0.
Tensor GumbelSoftmaxBernoulli(const Tensor& p, double temperature, Rng& rng,
                              bool hard);

}  // namespace diffabm::ad

#endif  // DIFFABM_AUTODIFF_SAMPLING_H_
