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


#ifndef DIFFABM_REFSIM_H_
#define DIFFABM_REFSIM_H_

#include "diffabm/epi_model.h"

namespace diffabm {

// Plain per-agent stochastic simulator: loops over agents and their venues,
// draws Bernoulli outcomes, keeps no tensors. It implements the same model
// as Simulate in hard mode with its own arithmetic, and is used as the
// reference when testing the tensorized engine. Only the horizon, seed,
// seeding and gate sharpness fields of `options` are used.
EpidemicTrace RunReference(const Population& pop, const DiseaseParams& params,
                           const ModulatorWeights* modulator,
                           const PolicySet& policies,
                           const SimOptions& options);

}  // namespace diffabm

#endif  // DIFFABM_REFSIM_H_
