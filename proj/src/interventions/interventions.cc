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


#include "diffabm/interventions.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffabm/errors.h"

namespace diffabm {
namespace {

void CheckRate(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(what) + " must be in [0, 1]");
  }
}

void CheckDays(int v, int lo, int hi, const char* what) {
  if (v < lo || v > hi) {
    throw ConfigError(std::string(what) + " must be in [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
  }
}

// A Bernoulli outcome in hard mode, its probability in relaxed mode.
double Trial(double p, Rng& rng, Mode mode) {
  if (mode == Mode::kRelaxed) return p;
  return rng.Bernoulli(p) ? 1.0 : 0.0;
}

constexpr int kSchoolSlot = static_cast<int>(VenueKind::kSchool);

}  // namespace

void PolicySet::Validate() const {
  CheckRate(icc.compliance_rate, "icc.compliance_rate");
  CheckRate(icc.detection_probability, "icc.detection_probability");
  CheckDays(icc.isolation_days, 4, 1 << 20, "icc.isolation_days");
  CheckDays(icc.detection_delay_days, 0, 1 << 20, "icc.detection_delay_days");
  CheckRate(qec.tracing_rate, "qec.tracing_rate");
  CheckDays(qec.quarantine_days, 7, 14, "qec.quarantine_days");
  CheckDays(sc.closure_days, 7, 14, "sc.closure_days");
  CheckRate(vc.daily_vaccination_rate, "vc.daily_vaccination_rate");
}

ControlModifier ControlModifier::Identity(std::size_t agents,
                                          std::size_t venues) {
  return {std::vector<double>(agents, 1.0), std::vector<double>(agents, 1.0),
          std::vector<double>(venues, 1.0)};
}

bool ControlModifier::IsIdentity() const {
  auto ones = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; });
  };
  return ones(infector) && ones(susceptible) && ones(venue_open);
}

ControlModifier ComposeControlModifier(std::span<const ControlModifier> parts) {
  if (parts.empty()) throw ShapeMismatch("compose: no contributions");
  ControlModifier out = ControlModifier::Identity(
      parts[0].infector.size(), parts[0].venue_open.size());
  auto fold = [](std::vector<double>& acc, const std::vector<double>& f) {
    if (f.size() != acc.size()) throw ShapeMismatch("compose: size differs");
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (!(f[i] >= 0.0 && f[i] <= 1.0)) {
        throw DomainError("compose: factor outside [0, 1]");
      }
      acc[i] *= f[i];
    }
  };
  for (const ControlModifier& p : parts) {
    fold(out.infector, p.infector);
    fold(out.susceptible, p.susceptible);
    fold(out.venue_open, p.venue_open);
  }
  return out;
}

PolicyState::PolicyState(std::size_t agents, std::size_t venues)
    : detection_day(agents, -1),
      detection_weight(agents, 0.0),
      isolated_until(agents, 0),
      isolation_weight(agents, 0.0),
      quarantined_until(agents, 0),
      quarantine_weight(agents, 0.0),
      closed_until(venues, 0) {}

PolicyStreams::PolicyStreams(std::uint64_t seed)
    : detect(DeriveSeed(seed, 11)),
      icc(DeriveSeed(seed, 12)),
      qec(DeriveSeed(seed, 13)),
      vc(DeriveSeed(seed, 14)) {}

std::vector<std::int32_t> DetectCases(PolicyState& state,
                                      std::span<const int> infection_day,
                                      double theta_ei, double theta_ir,
                                      const IccPolicy& detection, int day,
                                      Rng& rng, Mode mode) {
  const int lag =
      static_cast<int>(std::ceil(theta_ei + detection.detection_delay_days));
  std::vector<std::int32_t> found;
  for (std::size_t a = 0; a < infection_day.size(); ++a) {
    const int s = infection_day[a];
    if (s < 0 || state.detection_day[a] >= 0 || day - s != lag) continue;
    if (lag >= theta_ir) continue;
    const double w = Trial(detection.detection_probability, rng, mode);
    if (w <= 0.0) continue;
    state.detection_day[a] = day;
    state.detection_weight[a] = w;
    found.push_back(static_cast<std::int32_t>(a));
  }
  return found;
}

void ApplyIcc(PolicyState& state, std::span<const std::int32_t> detected,
              const IccPolicy& policy, int day, Rng& rng, Mode mode) {
  for (std::int32_t a : detected) {
    const double w =
        state.detection_weight[a] * Trial(policy.compliance_rate, rng, mode);
    if (w <= 0.0) continue;
    state.isolated_until[a] = day + policy.isolation_days;
    state.isolation_weight[a] = w;
    state.isolations.push_back({a, day, day + policy.isolation_days, w});
  }
}

void ApplyQec(PolicyState& state, const Population& pop,
              std::span<const std::int32_t> detected,
              std::span<const double> vaccinated, const QecPolicy& policy,
              int day, Rng& rng, Mode mode) {
  for (std::int32_t j : detected) {
    for (std::int32_t v : pop.agents[j].venue) {
      if (v == kNoVenue || state.closed_until[v] > day) continue;
      for (std::int32_t a : pop.venues[v].members) {
        if (a == j || state.quarantined_until[a] > day) continue;
        if (vaccinated[a] >= 1.0) continue;
        const double w = state.detection_weight[j] * (1.0 - vaccinated[a]) *
                         Trial(policy.tracing_rate, rng, mode);
        if (w <= 0.0) continue;
        state.quarantined_until[a] = day + policy.quarantine_days;
        state.quarantine_weight[a] = w;
        state.quarantines.push_back({a, day, day + policy.quarantine_days, w});
      }
    }
  }
}

void ApplySchoolClosure(PolicyState& state, const Population& pop,
                        std::span<const std::int32_t> detected,
                        const ScPolicy& policy, int day) {
  for (std::int32_t j : detected) {
    const std::int32_t school = pop.agents[j].venue[kSchoolSlot];
    if (school == kNoVenue || state.detection_weight[j] < 0.5) continue;
    if (state.closed_until[school] > day) continue;
    state.closed_until[school] = day + policy.closure_days;
    state.closures.push_back({school, day, day + policy.closure_days, 1.0});
  }
}

double ApplyVaccinationCampaign(std::vector<double>& vaccinated,
                                PolicyState& state, const Population& pop,
                                std::span<const int> infection_day,
                                double theta_ir, const VcPolicy& policy,
                                int day, Rng& rng, Mode mode) {
  std::vector<char> triggered(pop.regions.size(), 0);
  bool any = false;
  for (std::size_t a = 0; a < pop.size(); ++a) {
    if (state.detection_day[a] < 0 || state.detection_weight[a] < 0.5) continue;
    if (day - infection_day[a] >= theta_ir) continue;
    triggered[pop.agents[a].region] = 1;
    any = true;
  }
  double added = 0.0;
  if (any && policy.daily_vaccination_rate > 0.0) {
    for (std::size_t a = 0; a < pop.size(); ++a) {
      if (!triggered[pop.agents[a].region] || vaccinated[a] >= 1.0) continue;
      if (mode == Mode::kHard) {
        if (rng.Bernoulli(policy.daily_vaccination_rate)) {
          vaccinated[a] = 1.0;
          added += 1.0;
        }
      } else {
        const double dv = policy.daily_vaccination_rate * (1.0 - vaccinated[a]);
        vaccinated[a] += dv;
        added += dv;
      }
    }
  }
  if (state.vaccinations_per_day.size() <= static_cast<std::size_t>(day)) {
    state.vaccinations_per_day.resize(day + 1, 0);
  }
  state.vaccinations_per_day[day] = std::llround(added);
  return added;
}

ControlModifier IsolationModifier(const PolicyState& state, int day) {
  ControlModifier m = ControlModifier::Identity(state.isolated_until.size(),
                                                state.closed_until.size());
  for (std::size_t a = 0; a < m.infector.size(); ++a) {
    if (state.isolated_until[a] > day && state.detection_day[a] <= day) {
      m.infector[a] = 1.0 - state.isolation_weight[a];
    }
  }
  return m;
}

ControlModifier QuarantineModifier(const PolicyState& state, int day) {
  ControlModifier m = ControlModifier::Identity(state.quarantined_until.size(),
                                                state.closed_until.size());
  for (std::size_t a = 0; a < m.infector.size(); ++a) {
    if (state.quarantined_until[a] > day) {
      m.infector[a] = m.susceptible[a] = 1.0 - state.quarantine_weight[a];
    }
  }
  return m;
}

ControlModifier ClosureModifier(const PolicyState& state, int day) {
  ControlModifier m = ControlModifier::Identity(state.isolated_until.size(),
                                                state.closed_until.size());
  for (std::size_t v = 0; v < m.venue_open.size(); ++v) {
    if (state.closed_until[v] > day) m.venue_open[v] = 0.0;
  }
  return m;
}

}  // namespace diffabm
