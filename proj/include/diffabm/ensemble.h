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


#ifndef DIFFABM_ENSEMBLE_H_
#define DIFFABM_ENSEMBLE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffabm/epi_model.h"

namespace diffabm {

struct EnsembleConfig {
  int n_members = 100;
  std::uint64_t master_seed = 0;
  double jitter = 0.1;  // rho and q scaled by 1 + U(-jitter, jitter)
  double compliance_lo = 0.6;
  double compliance_hi = 0.8;
  bool resample_seeds = true;  // false: every member shares its seed agents
  int horizon_days = 70;
  int first_week = 0;  // week_index of the first simulated week
  std::vector<std::int32_t> seed_restriction;
  std::optional<std::int64_t> seed_count;
  double gate_sharpness = 4.0;

  // ConfigError on n_members < 1, jitter outside [0, 1) or a compliance
  // range outside 0 <= lo <= hi <= 1.
  void Validate() const;
};

struct EnsembleSummary {
  std::vector<int> week_index;
  std::vector<double> mean, q05, q25, median, q75, q95;
  std::vector<double> member_totals;  // cumulative cases per member

  std::size_t weeks() const { return week_index.size(); }
};

struct EnsembleMember {
  std::vector<double> weekly;
  double compliance = 0.0;
  // (agent, day) for every agent infected during the run.
  std::vector<std::pair<std::int32_t, int>> infections;
};

struct EnsembleResult {
  EnsembleSummary summary;
  std::vector<EnsembleMember> members;
};

// Linearly interpolated order statistic of sorted `values`, 0 <= level <= 1.
double Quantile(const std::vector<double>& sorted, double level);

// Per-week mean and quantiles over members. EmptySeries with no members,
// LengthMismatch if their lengths differ. Member order does not matter.
EnsembleSummary Summarize(const std::vector<std::vector<double>>& member_weekly,
                          int first_week = 0);

// Runs every member in hard mode, in parallel. Member i uses the streams of
// DeriveSeed(master_seed, i).
EnsembleResult RunEnsemble(const ModelContext& ctx,
                           const DiseaseParams& params,
                           const ModulatorWeights* modulator,
                           const PolicySet& policies,
                           const EnsembleConfig& config);

// ensemble.csv: week_index,mean,q05,q25,median,q75,q95
std::string EnsembleCsv(const EnsembleSummary& s);
EnsembleSummary LoadEnsembleCsv(const std::string& path);
// members.csv: member,week_index,new_cases
std::string MembersCsv(const EnsembleResult& r, int first_week);
// infections.csv: member,agent_id,infection_day (agent ids as in agents.csv)
std::string InfectionsCsv(const EnsembleResult& r, const Population& pop);

}  // namespace diffabm

#endif  // DIFFABM_ENSEMBLE_H_
