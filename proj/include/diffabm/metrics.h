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


#ifndef DIFFABM_METRICS_H_
#define DIFFABM_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffabm/calibration.h"
#include "diffabm/ensemble.h"
#include "diffabm/population.h"

namespace diffabm {

struct Peak {
  int week = 0;
  double value = 0.0;
};

// Largest value, earliest week on ties. EmptySeries if nothing to scan,
// LengthMismatch if the week labels do not match the values.
Peak PeakWeek(std::span<const double> values, std::span<const int> weeks);

struct Share {
  std::string category;
  double percent = 0.0;
};

// Percent of infections per category of `attribute` ("ethnicity" or
// "age_band"; UnknownAttribute otherwise). With `reporting_psi2`, infections
// of initially vaccinated agents count 1 - psi2, modelling milder, less
// often reported cases. All zeros when nobody was infected.
std::vector<Share> Breakdown(const Population& pop,
                             std::span<const std::int32_t> infected,
                             const std::string& attribute,
                             std::optional<double> reporting_psi2 = {});
// Same, over the agents infected in `trace`.
std::vector<Share> BreakdownBy(const EpidemicTrace& trace,
                               const Population& pop,
                               const std::string& attribute,
                               std::optional<double> reporting_psi2 = {});

struct ComparisonReport {
  std::vector<int> week_index;
  std::vector<double> observed;
  std::vector<double> sim_mean, sim_q05, sim_q25, sim_median, sim_q75,
      sim_q95;
  double cumulative_sim = 0.0;
  double cumulative_obs = 0.0;
  Peak peak_sim, peak_obs;
  std::vector<Share> by_ethnicity;  // empty without infection data
  std::vector<Share> by_age_band;

  double cumulative_difference() const { return cumulative_sim - cumulative_obs; }
};

// WeekRangeMismatch unless both series cover the same weeks.
ComparisonReport MakeComparisonReport(const EnsembleSummary& sim,
                                      const ObservationSeries& observed);

std::string ReportJson(const ComparisonReport& r,
                       const std::string& config_hash = "");
ComparisonReport ParseReportJson(const std::string& text,
                                 const std::string& name);
// curves.csv: week_index,observed,sim_mean,sim_q05,sim_q95
std::string CurvesCsv(const ComparisonReport& r);
// breakdown.csv: attribute,category,percent
std::string BreakdownCsv(const ComparisonReport& r);

}  // namespace diffabm

#endif  // DIFFABM_METRICS_H_
