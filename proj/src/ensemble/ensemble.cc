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


#include "diffabm/ensemble.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <omp.h>

#include "diffabm/calibration.h"
#include "diffabm/errors.h"
#include "diffabm/io/csv.h"

namespace diffabm {

void EnsembleConfig::Validate() const {
  if (n_members < 1) throw ConfigError("n_members must be at least 1");
  if (!(jitter >= 0 && jitter < 1)) {
    throw ConfigError("jitter must lie in [0, 1)");
  }
  if (!(compliance_lo >= 0 && compliance_lo <= compliance_hi &&
        compliance_hi <= 1)) {
    throw ConfigError("compliance range must satisfy 0 <= lo <= hi <= 1");
  }
  if (horizon_days < 1) throw ConfigError("horizon_days must be at least 1");
}

double Quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw EmptySeries("quantile of an empty sample");
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

EnsembleSummary Summarize(const std::vector<std::vector<double>>& member_weekly,
                          int first_week) {
  if (member_weekly.empty()) throw EmptySeries("ensemble has no members");
  const std::size_t weeks = member_weekly[0].size();
  for (const auto& m : member_weekly) {
    if (m.size() != weeks) {
      throw LengthMismatch("ensemble members differ in length");
    }
  }
  EnsembleSummary s;
  std::vector<double> col(member_weekly.size());
  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t m = 0; m < member_weekly.size(); ++m) {
      col[m] = member_weekly[m][w];
    }
    std::sort(col.begin(), col.end());
    // Summing in sorted order keeps the mean independent of member order.
    double total = 0.0;
    for (double v : col) total += v;
    s.week_index.push_back(first_week + static_cast<int>(w));
    s.mean.push_back(total / static_cast<double>(col.size()));
    s.q05.push_back(Quantile(col, 0.05));
    s.q25.push_back(Quantile(col, 0.25));
    s.median.push_back(Quantile(col, 0.5));
    s.q75.push_back(Quantile(col, 0.75));
    s.q95.push_back(Quantile(col, 0.95));
  }
  for (const auto& m : member_weekly) {
    std::vector<double> sorted = m;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double v : sorted) total += v;
    s.member_totals.push_back(total);
  }
  std::sort(s.member_totals.begin(), s.member_totals.end());
  return s;
}

EnsembleResult RunEnsemble(const ModelContext& ctx,
                           const DiseaseParams& params,
                           const ModulatorWeights* modulator,
                           const PolicySet& policies,
                           const EnsembleConfig& config) {
  config.Validate();
  params.Validate();
  policies.Validate();
  EnsembleResult result;
  result.members.resize(config.n_members);
  const std::optional<ModulatorTensors> mod =
      modulator ? std::optional(ModulatorTensors::Constant(*modulator))
                : std::nullopt;

  // Exceptions cannot cross the parallel region; keep the first by index.
  std::vector<std::string> errors(config.n_members);
  std::vector<char> failed(config.n_members, 0);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < config.n_members; ++i) {
    try {
      const std::uint64_t seed =
          DeriveSeed(config.master_seed, static_cast<std::uint64_t>(i));
      Rng rng(DeriveSeed(seed, 0xe5));
      DiseaseParams p = params;
      for (double& r : p.venue.rho) {
        r *= 1.0 + rng.Uniform(-config.jitter, config.jitter);
      }
      for (double& q : p.venue.q) {
        q *= 1.0 + rng.Uniform(-config.jitter, config.jitter);
      }
      PolicySet ps = policies;
      ps.icc.compliance_rate =
          rng.Uniform(config.compliance_lo, config.compliance_hi);

      SimOptions o;
      o.horizon_days = config.horizon_days;
      o.mode = Mode::kHard;
      o.gate_sharpness = config.gate_sharpness;
      o.seed_restriction = config.seed_restriction;
      o.seed_count = config.seed_count;
      o.seed = seed;
      if (!config.resample_seeds) o.seeding_seed = config.master_seed;
      const SimResult r =
          Simulate(ctx, ParamTensors::Constant(p), mod ? &*mod : nullptr, ps, o);

      EnsembleMember& m = result.members[i];
      m.weekly = WeeklyAggregate(r.trace.new_infections);
      m.compliance = ps.icc.compliance_rate;
      for (std::size_t a = 0; a < r.trace.infection_day.size(); ++a) {
        if (r.trace.infection_day[a] >= 0) {
          m.infections.emplace_back(static_cast<std::int32_t>(a),
                                    r.trace.infection_day[a]);
        }
      }
    } catch (const std::exception& e) {
      failed[i] = 1;
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < config.n_members; ++i) {
    if (failed[i]) {
      throw InconsistentState("ensemble member " + std::to_string(i) + ": " +
                              errors[i]);
    }
  }
  std::vector<std::vector<double>> weekly;
  for (const EnsembleMember& m : result.members) weekly.push_back(m.weekly);
  result.summary = Summarize(weekly, config.first_week);
  return result;
}

std::string EnsembleCsv(const EnsembleSummary& s) {
  std::ostringstream out;
  out << "week_index,mean,q05,q25,median,q75,q95\n";
  for (std::size_t w = 0; w < s.weeks(); ++w) {
    out << s.week_index[w];
    for (double v : {s.mean[w], s.q05[w], s.q25[w], s.median[w], s.q75[w],
                     s.q95[w]}) {
      out << ',' << io::FormatReal(v);
    }
    out << '\n';
  }
  return out.str();
}

EnsembleSummary LoadEnsembleCsv(const std::string& path) {
  const io::CsvFile csv(path, "week_index,mean,q05,q25,median,q75,q95");
  EnsembleSummary s;
  for (const io::CsvRow& row : csv.rows()) {
    const auto week = static_cast<int>(csv.Int(row, 0));
    if (!s.week_index.empty() && week != s.week_index.back() + 1) {
      csv.Fail(row, "weeks must be consecutive");
    }
    s.week_index.push_back(week);
    std::vector<double>* cols[] = {&s.mean, &s.q05,  &s.q25,
                                   &s.median, &s.q75, &s.q95};
    for (std::size_t c = 0; c < 6; ++c) cols[c]->push_back(csv.Real(row, c + 1));
    if (!(s.q05.back() <= s.q25.back() && s.q25.back() <= s.median.back() &&
          s.median.back() <= s.q75.back() && s.q75.back() <= s.q95.back())) {
      csv.Fail(row, "quantiles are not ordered");
    }
  }
  if (s.week_index.empty()) throw ParseError(csv.name(), 1, "no weeks");
  return s;
}

std::string MembersCsv(const EnsembleResult& r, int first_week) {
  std::ostringstream out;
  out << "member,week_index,new_cases\n";
  for (std::size_t m = 0; m < r.members.size(); ++m) {
    for (std::size_t w = 0; w < r.members[m].weekly.size(); ++w) {
      out << m << ',' << first_week + static_cast<int>(w) << ','
          << io::FormatReal(r.members[m].weekly[w]) << '\n';
    }
  }
  return out.str();
}

std::string InfectionsCsv(const EnsembleResult& r, const Population& pop) {
  std::ostringstream out;
  out << "member,agent_id,infection_day\n";
  for (std::size_t m = 0; m < r.members.size(); ++m) {
    for (const auto& [agent, day] : r.members[m].infections) {
      out << m << ',' << pop.agents[agent].id << ',' << day << '\n';
    }
  }
  return out.str();
}

}  // namespace diffabm
