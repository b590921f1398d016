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

#ifndef DIFFABM_AUTODIFF_SPECIAL_H_
#define DIFFABM_AUTODIFF_SPECIAL_H_

namespace diffabm::ad {

// ln Gamma(x) for x > 0 (Lanczos, g = 7, nine terms). Absolute error is
// below 1e-12 on (0, 50]. Throws DomainError for x <= 0 or NaN.
double LogGamma(double x);

// psi(x) = d/dx ln Gamma(x) for x > 0. Upward recurrence to x >= 10, then
// the asymptotic series through x^-14.
double Digamma(double x);

}  // namespace diffabm::ad

#endif  // DIFFABM_AUTODIFF_SPECIAL_H_
