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


#include "diffabm/refsim.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffabm/errors.h"

namespace diffabm {
namespace {

enum class Stage { kSusceptible, kExposed, kInfectious, kRecovered };

struct RefAgent {
  Stage stage = Stage::kSusceptible;
  int infection_day = -1;
  bool vaccinated = false;
  bool detected = false;
  int isolated_until = 0;
  int quarantined_until = 0;
  double susceptibility = 1.0;  // product of attribute factors, sans vaccine
};

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class Profile {
 public:
  Profile(const DiseaseParams& p, double k)
      : v_(p.gamma_shape), scale_(p.gamma_scale), ei_(p.theta_ei),
        ir_(p.theta_ir), k_(k) {
    log_peak_ = LogDensity((v_ - 1.0) * scale_);
  }
  double operator()(int days) const {
    if (days <= 0) return 0.0;
    const double d = days;
    return std::exp(LogDensity(d) - log_peak_) * Logistic(k_ * (d - ei_)) *
           Logistic(k_ * (ir_ - d));
  }

 private:
  double LogDensity(double d) const {
    return (v_ - 1.0) * std::log(d) - d / scale_ - v_ * std::log(scale_) -
           std::lgamma(v_);
  }
  double v_, scale_, ei_, ir_, k_, log_peak_;
};

// Scalar LSTM forward pass.
class Modulator {
 public:
  explicit Modulator(const ModulatorWeights& w)
      : w_(w), h_(w.hidden, 0.0), c_(w.hidden, 0.0) {}

  void Step(double x, double& r_mult, double& phi) {
    const int n = w_.hidden;
    std::vector<double> gates[4];
    for (int k = 0; k < 4; ++k) {
      gates[k].resize(n);
      for (int r = 0; r < n; ++r) {
        const double* row = &w_.w[k][static_cast<std::size_t>(r) * (n + 1)];
        double z = w_.b[k][r] + row[0] * x;
        for (int j = 0; j < n; ++j) z += row[j + 1] * h_[j];
        gates[k][r] = z;
      }
    }
    for (int r = 0; r < n; ++r) {
      const double i = Logistic(gates[0][r]);
      const double f = Logistic(gates[1][r]);
      const double o = Logistic(gates[2][r]);
      const double g = std::tanh(gates[3][r]);
      c_[r] = f * c_[r] + i * g;
      h_[r] = o * std::tanh(c_[r]);
    }
    double zr = w_.bias_r, zp = w_.bias_phi;
    for (int j = 0; j < n; ++j) {
      zr += w_.head_r[j] * h_[j];
      zp += w_.head_phi[j] * h_[j];
    }
    r_mult = 2.0 * Logistic(zr);
    phi = w_.phi_max * Logistic(zp);
  }

 private:
  const ModulatorWeights& w_;
  std::vector<double> h_, c_;
};

}  // namespace

EpidemicTrace RunReference(const Population& pop, const DiseaseParams& params,
                           const ModulatorWeights* modulator,
                           const PolicySet& policies,
                           const SimOptions& options) {
  params.Validate();
  policies.Validate();
  if (options.horizon_days < 1) throw DomainError("horizon must be >= 1 day");
  const int n = static_cast<int>(pop.size());
  const Profile profile(params, options.gate_sharpness);
  Rng rng(DeriveSeed(options.seed, 0x5eed));

  std::vector<RefAgent> agents(n);
  for (int a = 0; a < n; ++a) {
    const Agent& src = pop.agents[a];
    RefAgent& r = agents[a];
    r.vaccinated = src.vaccinated;
    r.susceptibility = params.attr.age[AgeBand(src.age)] *
                       params.attr.sex[static_cast<int>(src.sex)] *
                       params.attr.ethnicity[static_cast<int>(src.ethnicity)];
  }
  std::vector<int> closed_until(pop.venues.size(), 0);

  EpidemicTrace trace;
  std::vector<int> infected_today;
  auto infect = [&](int a, int day) {
    agents[a].stage = Stage::kExposed;
    agents[a].infection_day = day;
  };
  auto record = [&](int day, double r_mult, double phi, int new_cases) {
    double s = 0, e = 0, i = 0, r = 0;
    for (RefAgent& ag : agents) {
      if (ag.stage != Stage::kSusceptible) {
        const int d = day - ag.infection_day;
        ag.stage = d < params.theta_ei   ? Stage::kExposed
                   : d < params.theta_ir ? Stage::kInfectious
                                         : Stage::kRecovered;
      }
      switch (ag.stage) {
        case Stage::kSusceptible: s += 1; break;
        case Stage::kExposed: e += 1; break;
        case Stage::kInfectious: i += 1; break;
        case Stage::kRecovered: r += 1; break;
      }
    }
    trace.new_infections.push_back(new_cases);
    trace.S.push_back(s);
    trace.E.push_back(e);
    trace.I.push_back(i);
    trace.R.push_back(r);
    trace.r_multiplier.push_back(r_mult);
    trace.phi.push_back(phi);
  };

  // Weekly modulator.
  std::optional<Modulator> lstm;
  if (modulator) lstm.emplace(*modulator);
  double r_mult = 1.0, phi = params.phi;
  auto update_modulator = [&](int day) {
    if (!lstm || day % 7 != 0) return;
    double x = 0.0;
    if (day > 0) {
      double week = 0.0;
      for (int s = day - 7; s < day; ++s) week += trace.new_infections[s];
      x = std::log(1.0 + week) / std::log(1.0 + n);
    }
    lstm->Step(x, r_mult, phi);
  };

  // Day 0.
  update_modulator(0);
  std::vector<int> eligible;
  if (options.seed_restriction.empty()) {
    eligible.resize(n);
    std::iota(eligible.begin(), eligible.end(), 0);
  } else {
    eligible.assign(options.seed_restriction.begin(),
                    options.seed_restriction.end());
  }
  int seeded = 0;
  if (options.seed_count) {
    std::sort(eligible.begin(), eligible.end());
    eligible.erase(std::unique(eligible.begin(), eligible.end()),
                   eligible.end());
    if (*options.seed_count > static_cast<std::int64_t>(eligible.size())) {
      throw DomainError("seed count exceeds the eligible agents");
    }
    std::shuffle(eligible.begin(), eligible.end(), rng.engine());
    for (std::int64_t k = 0; k < *options.seed_count; ++k) {
      infect(eligible[k], 0);
      ++seeded;
    }
  } else {
    for (int a : eligible) {
      if (rng.Uniform() < params.beta) {
        infect(a, 0);
        ++seeded;
      }
    }
  }
  record(0, r_mult, phi, seeded);

  const bool any_policy = policies.any();
  const int detect_lag = static_cast<int>(
      std::ceil(params.theta_ei + policies.icc.detection_delay_days));
  const int school = static_cast<int>(VenueKind::kSchool);

  for (int day = 1; day < options.horizon_days; ++day) {
    update_modulator(day);

    if (any_policy) {
      std::vector<int> found;
      for (int a = 0; a < n; ++a) {
        RefAgent& ag = agents[a];
        if (ag.infection_day < 0 || ag.detected) continue;
        if (day - ag.infection_day != detect_lag ||
            detect_lag >= params.theta_ir) {
          continue;
        }
        if (rng.Uniform() < policies.icc.detection_probability) {
          ag.detected = true;
          found.push_back(a);
        }
      }
      for (int j : found) {
        if (policies.icc.enabled &&
            rng.Uniform() < policies.icc.compliance_rate) {
          agents[j].isolated_until = day + policies.icc.isolation_days;
        }
      }
      for (int j : policies.qec.enabled ? found : std::vector<int>{}) {
        for (std::int32_t v : pop.agents[j].venue) {
          if (v == kNoVenue || closed_until[v] > day) continue;
          for (std::int32_t a : pop.venues[v].members) {
            RefAgent& contact = agents[a];
            if (a == j || contact.vaccinated ||
                contact.quarantined_until > day) {
              continue;
            }
            if (rng.Uniform() < policies.qec.tracing_rate) {
              contact.quarantined_until = day + policies.qec.quarantine_days;
            }
          }
        }
      }
      for (int j : policies.sc.enabled ? found : std::vector<int>{}) {
        const std::int32_t v = pop.agents[j].venue[school];
        if (v != kNoVenue && closed_until[v] <= day) {
          closed_until[v] = day + policies.sc.closure_days;
        }
      }
    }

    // Transmission, evaluated against the state at the start of the day.
    infected_today.clear();
    for (int a = 0; a < n; ++a) {
      RefAgent& target = agents[a];
      if (target.stage != Stage::kSusceptible) continue;
      double pressure = 0.0;
      for (int k = 0; k < kNumVenueKinds; ++k) {
        const std::int32_t v = pop.agents[a].venue[k];
        if (v == kNoVenue || closed_until[v] > day) continue;
        double venue_sum = 0.0;
        for (std::int32_t j : pop.venues[v].members) {
          const RefAgent& src = agents[j];
          if (j == a || src.infection_day < 0) continue;
          if (src.isolated_until > day || src.quarantined_until > day) continue;
          venue_sum += profile(day - src.infection_day) *
                       (src.vaccinated ? 1.0 - params.psi2 : 1.0);
        }
        pressure += venue_sum * params.venue.rho[k] / params.venue.q[k];
      }
      if (target.quarantined_until > day) pressure = 0.0;
      const double vacc_factor =
          target.vaccinated
              ? params.attr.vaccination[1] * (1.0 - params.psi1)
              : params.attr.vaccination[0];
      const double rate =
          params.R * r_mult * target.susceptibility * vacc_factor * pressure;
      const double p_contact = 1.0 - std::exp(-rate);
      const bool by_contact = rng.Uniform() < p_contact;
      const bool by_background = rng.Uniform() < phi;
      if (by_contact || by_background) infected_today.push_back(a);
    }
    for (int a : infected_today) infect(a, day);
    record(day, r_mult, phi, static_cast<int>(infected_today.size()));

    if (policies.vc.enabled) {
      std::vector<char> active(pop.regions.size(), 0);
      for (int a = 0; a < n; ++a) {
        const RefAgent& ag = agents[a];
        if (ag.detected && day - ag.infection_day < params.theta_ir) {
          active[pop.agents[a].region] = 1;
        }
      }
      for (int a = 0; a < n; ++a) {
        if (active[pop.agents[a].region] && !agents[a].vaccinated &&
            rng.Uniform() < policies.vc.daily_vaccination_rate) {
          agents[a].vaccinated = true;
        }
      }
    }
  }
  trace.infection_day.resize(n);
  for (int a = 0; a < n; ++a) {
    trace.infection_day[a] = agents[a].infection_day;
  }
  return trace;
}

}  // namespace diffabm
