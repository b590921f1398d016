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


#include "diffabm/metrics.h"

#include <numeric>
#include <sstream>

#include <json.hpp>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"

namespace diffabm {
namespace {

using Json = nlohmann::ordered_json;

Json SharesJson(const std::vector<Share>& shares) {
  Json j = Json::object();
  for (const Share& s : shares) j[s.category] = s.percent;
  return j;
}

std::vector<Share> SharesFrom(const Json& j) {
  std::vector<Share> out;
  for (const auto& [k, v] : j.items()) out.push_back({k, v.get<double>()});
  return out;
}

}  // namespace

Peak PeakWeek(std::span<const double> values, std::span<const int> weeks) {
  if (values.empty()) throw EmptySeries("no weeks to find a peak in");
  if (values.size() != weeks.size()) {
    throw LengthMismatch("peak: weeks and values differ in length");
  }
  Peak p{weeks[0], values[0]};
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > p.value) p = {weeks[i], values[i]};
  }
  return p;
}

std::vector<Share> Breakdown(const Population& pop,
                             std::span<const std::int32_t> infected,
                             const std::string& attribute,
                             std::optional<double> reporting_psi2) {
  std::vector<Share> out;
  std::vector<double> weight;
  auto category = [&](const Agent& a) -> int {
    if (attribute == "ethnicity") return static_cast<int>(a.ethnicity);
    return AgeBand(a.age);
  };
  if (attribute == "ethnicity") {
    for (int e = 0; e < kNumEthnicities; ++e) {
      out.push_back({std::string(EthnicityName(static_cast<Ethnicity>(e))), 0});
    }
  } else if (attribute == "age_band") {
    for (int b = 0; b < kNumAgeBands; ++b) {
      out.push_back({std::string(AgeBandName(b)), 0});
    }
  } else {
    throw UnknownAttribute("unknown breakdown attribute '" + attribute + "'");
  }
  if (reporting_psi2 && !(*reporting_psi2 >= 0 && *reporting_psi2 <= 1)) {
    throw DomainError("psi2 must lie in [0, 1]");
  }
  weight.assign(out.size(), 0.0);
  for (std::int32_t id : infected) {
    if (id < 0 || static_cast<std::size_t>(id) >= pop.size()) {
      throw IntegrityError("infected agent " + std::to_string(id) +
                           " is not in the population");
    }
    const Agent& a = pop.agents[id];
    const double w =
        reporting_psi2 && a.vaccinated ? 1.0 - *reporting_psi2 : 1.0;
    weight[category(a)] += w;
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (total > 0) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c].percent = 100.0 * weight[c] / total;
    }
  }
  return out;
}

std::vector<Share> BreakdownBy(const EpidemicTrace& trace,
                               const Population& pop,
                               const std::string& attribute,
                               std::optional<double> reporting_psi2) {
  if (trace.infection_day.size() != pop.size()) {
    throw LengthMismatch("trace and population differ in agent count");
  }
  std::vector<std::int32_t> infected;
  for (std::size_t a = 0; a < pop.size(); ++a) {
    if (trace.infection_day[a] >= 0) {
      infected.push_back(static_cast<std::int32_t>(a));
    }
  }
  return Breakdown(pop, infected, attribute, reporting_psi2);
}

ComparisonReport MakeComparisonReport(const EnsembleSummary& sim,
                                      const ObservationSeries& observed) {
  if (sim.week_index != observed.week_index) {
    auto range = [](const std::vector<int>& w) {
      return w.empty() ? std::string("none")
                       : std::to_string(w.front()) + "-" +
                             std::to_string(w.back());
    };
    throw WeekRangeMismatch("simulated weeks " + range(sim.week_index) +
                            " do not match observed weeks " +
                            range(observed.week_index));
  }
  ComparisonReport r;
  r.week_index = sim.week_index;
  r.observed = observed.cases;
  r.sim_mean = sim.mean;
  r.sim_q05 = sim.q05;
  r.sim_q25 = sim.q25;
  r.sim_median = sim.median;
  r.sim_q75 = sim.q75;
  r.sim_q95 = sim.q95;
  r.cumulative_sim = std::accumulate(sim.mean.begin(), sim.mean.end(), 0.0);
  r.cumulative_obs =
      std::accumulate(observed.cases.begin(), observed.cases.end(), 0.0);
  r.peak_sim = PeakWeek(r.sim_mean, r.week_index);
  r.peak_obs = PeakWeek(r.observed, r.week_index);
  return r;
}

std::string ReportJson(const ComparisonReport& r,
                       const std::string& config_hash) {
  Json j;
  j["week_index"] = r.week_index;
  j["observed"] = r.observed;
  j["simulated"] = {{"mean", r.sim_mean},     {"q05", r.sim_q05},
                    {"q25", r.sim_q25},       {"median", r.sim_median},
                    {"q75", r.sim_q75},       {"q95", r.sim_q95}};
  j["cumulative_sim"] = r.cumulative_sim;
  j["cumulative_obs"] = r.cumulative_obs;
  j["cumulative_difference"] = r.cumulative_difference();
  j["peak_sim"] = {{"week", r.peak_sim.week}, {"value", r.peak_sim.value}};
  j["peak_obs"] = {{"week", r.peak_obs.week}, {"value", r.peak_obs.value}};
  j["breakdown"] = {{"ethnicity", SharesJson(r.by_ethnicity)},
                    {"age_band", SharesJson(r.by_age_band)}};
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

ComparisonReport ParseReportJson(const std::string& text,
                                 const std::string& name) {
  try {
    const Json j = Json::parse(text);
    ComparisonReport r;
    r.week_index = j.at("week_index").get<std::vector<int>>();
    r.observed = j.at("observed").get<std::vector<double>>();
    const Json& s = j.at("simulated");
    r.sim_mean = s.at("mean").get<std::vector<double>>();
    r.sim_q05 = s.at("q05").get<std::vector<double>>();
    r.sim_q25 = s.at("q25").get<std::vector<double>>();
    r.sim_median = s.at("median").get<std::vector<double>>();
    r.sim_q75 = s.at("q75").get<std::vector<double>>();
    r.sim_q95 = s.at("q95").get<std::vector<double>>();
    r.cumulative_sim = j.at("cumulative_sim").get<double>();
    r.cumulative_obs = j.at("cumulative_obs").get<double>();
    r.peak_sim = {j.at("peak_sim").at("week").get<int>(),
                  j.at("peak_sim").at("value").get<double>()};
    r.peak_obs = {j.at("peak_obs").at("week").get<int>(),
                  j.at("peak_obs").at("value").get<double>()};
    r.by_ethnicity = SharesFrom(j.at("breakdown").at("ethnicity"));
    r.by_age_band = SharesFrom(j.at("breakdown").at("age_band"));
    return r;
  } catch (const Json::exception& e) {
    throw DataError(name + ": " + e.what());
  }
}

std::string CurvesCsv(const ComparisonReport& r) {
  std::ostringstream out;
  out << "week_index,observed,sim_mean,sim_q05,sim_q95\n";
  for (std::size_t w = 0; w < r.week_index.size(); ++w) {
    out << r.week_index[w] << ',' << io::FormatReal(r.observed[w]) << ','
        << io::FormatReal(r.sim_mean[w]) << ',' << io::FormatReal(r.sim_q05[w])
        << ',' << io::FormatReal(r.sim_q95[w]) << '\n';
  }
  return out.str();
}

std::string BreakdownCsv(const ComparisonReport& r) {
  std::ostringstream out;
  out << "attribute,category,percent\n";
  for (const Share& s : r.by_ethnicity) {
    out << "ethnicity," << s.category << ',' << io::FormatReal(s.percent)
        << '\n';
  }
  for (const Share& s : r.by_age_band) {
    out << "age_band," << s.category << ',' << io::FormatReal(s.percent)
        << '\n';
  }
  return out.str();
}

}  // namespace diffabm
