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


#ifndef DIFFABM_INTERVENTIONS_H_
#define DIFFABM_INTERVENTIONS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "diffabm/population.h"
#include "diffabm/rng.h"

namespace diffabm {

enum class Mode { kRelaxed, kHard };

// Isolation of confirmed cases. The detection settings here drive case
// detection for every policy, so they apply even when `enabled` is false.
struct IccPolicy {
  bool enabled = false;
  double compliance_rate = 1.0;
  int isolation_days = 4;
  int detection_delay_days = 2;
  double detection_probability = 1.0;
};

// Quarantine of unvaccinated contacts of a detected case.
struct QecPolicy {
  bool enabled = false;
  double tracing_rate = 1.0;
  int quarantine_days = 14;
};

// Closure of schools with a detected member.
struct ScPolicy {
  bool enabled = false;
  int closure_days = 7;
};

// Same-region vaccination while a detected case is still infectious.
struct VcPolicy {
  bool enabled = false;
  double daily_vaccination_rate = 0.05;
};

struct PolicySet {
  IccPolicy icc;
  QecPolicy qec;
  ScPolicy sc;
  VcPolicy vc;

  bool any() const { return icc.enabled || qec.enabled || sc.enabled || vc.enabled; }
  // ConfigError for rates outside [0, 1], isolation_days < 4, or
  // quarantine/closure days outside [7, 14].
  void Validate() const;
};

// A policy applied to one agent (or venue) over days [start, end).
struct PolicySpan {
  std::int32_t who = 0;
  int start = 0;
  int end = 0;
  double weight = 1.0;  // 1 in hard mode; the expected effect when relaxed
};

// Per-agent multiplicative factors on infectiousness and susceptibility and
// per-venue open factors, all in [0, 1].
struct ControlModifier {
  std::vector<double> infector;
  std::vector<double> susceptible;
  std::vector<double> venue_open;

  static ControlModifier Identity(std::size_t agents, std::size_t venues);
  bool IsIdentity() const;
};

// Combines contributions multiplicatively. ShapeMismatch if sizes differ,
// DomainError if any factor lies outside [0, 1].
ControlModifier ComposeControlModifier(std::span<const ControlModifier> parts);

// Everything the policies remember during one run. Days are absolute
// simulation days; "until" values are exclusive.
struct PolicyState {
  PolicyState(std::size_t agents, std::size_t venues);

  std::vector<int> detection_day;        // -1 if never detected
  std::vector<double> detection_weight;  // 0/1 hard, probability relaxed
  std::vector<int> isolated_until;
  std::vector<double> isolation_weight;
  std::vector<int> quarantined_until;
  std::vector<double> quarantine_weight;
  std::vector<int> closed_until;  // per venue

  std::vector<PolicySpan> isolations;
  std::vector<PolicySpan> quarantines;
  std::vector<PolicySpan> closures;
  std::vector<std::int64_t> vaccinations_per_day;
};

// Independent random streams for each policy, so enabling one policy does
// not shift the draws of another.
struct PolicyStreams {
  explicit PolicyStreams(std::uint64_t seed);
  Rng detect;
  Rng icc;
  Rng qec;
  Rng vc;
};

// Marks agents whose first eligible day is `day`: infected at day s, and
// day is the first with day - s >= theta_ei + delay while day - s < theta_ir.
// Hard mode draws a Bernoulli trial; relaxed mode records the probability as
// the detection weight. Returns the agents detected today.
std::vector<std::int32_t> DetectCases(PolicyState& state,
                                      std::span<const int> infection_day,
                                      double theta_ei, double theta_ir,
                                      const IccPolicy& detection, int day,
                                      Rng& rng, Mode mode);

// Isolation for each newly detected agent that complies.
void ApplyIcc(PolicyState& state, std::span<const std::int32_t> detected,
              const IccPolicy& policy, int day, Rng& rng, Mode mode);

// Quarantine for unvaccinated agents that share an open venue with a newly
// detected agent. Agents already in quarantine are left alone.
void ApplyQec(PolicyState& state, const Population& pop,
              std::span<const std::int32_t> detected,
              std::span<const double> vaccinated, const QecPolicy& policy,
              int day, Rng& rng, Mode mode);

// Closes every open school with a newly detected member (detection weight at
// least 0.5).
void ApplySchoolClosure(PolicyState& state, const Population& pop,
                        std::span<const std::int32_t> detected,
                        const ScPolicy& policy, int day);

// End-of-day vaccination in regions with an active detection (detected and
// still within theta_ir of infection). Updates `vaccinated` in place; returns
// the number of newly vaccinated agents (expected number when relaxed).
double ApplyVaccinationCampaign(std::vector<double>& vaccinated,
                                PolicyState& state, const Population& pop,
                                std::span<const int> infection_day,
                                double theta_ir, const VcPolicy& policy,
                                int day, Rng& rng, Mode mode);

// Per-policy contributions active on `day`.
ControlModifier IsolationModifier(const PolicyState& state, int day);
ControlModifier QuarantineModifier(const PolicyState& state, int day);
ControlModifier ClosureModifier(const PolicyState& state, int day);

}  // namespace diffabm

#endif  // DIFFABM_INTERVENTIONS_H_
