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


#include <doctest.h>

#include <cmath>
#include <numeric>

#include "diffabm/errors.h"
#include "diffabm/metrics.h"
#include "sim_fixtures.h"

using namespace diffabm;

namespace {

double SumPercent(const std::vector<Share>& s) {
  double t = 0.0;
  for (const Share& x : s) t += x.percent;
  return t;
}

EnsembleSummary Flat(std::vector<double> mean, int first_week) {
  std::vector<std::vector<double>> one{std::move(mean)};
  return Summarize(one, first_week);
}

ObservationSeries Obs(std::vector<double> cases, int first_week) {
  ObservationSeries o;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    o.week_index.push_back(first_week + static_cast<int>(i));
  }
  o.cases = std::move(cases);
  return o;
}

}  // namespace

TEST_CASE("peak week") {
  const std::vector<int> weeks{26, 27, 28};
  const Peak p = PeakWeek(std::vector<double>{0, 5, 3}, weeks);
  CHECK(p.week == 27);
  CHECK(p.value == 5);
  const Peak tie = PeakWeek(std::vector<double>{4, 4}, std::vector<int>{3, 4});
  CHECK(tie.week == 3);
  CHECK_THROWS_AS(PeakWeek(std::vector<double>{}, std::vector<int>{}),
                  EmptySeries);
}

TEST_CASE("breakdown basics") {
  Population pop = diffabm::testing::Households(12, {});
  for (Agent& a : pop.agents) {
    a.ethnicity = static_cast<Ethnicity>(a.id % kNumEthnicities);
    a.age = 3 + 8 * (a.id % 7);
  }
  const std::vector<std::int32_t> maori{0, 6};
  const std::vector<Share> only = Breakdown(pop, maori, "ethnicity");
  CHECK(only[0].category == "Maori");
  CHECK(only[0].percent == 100.0);
  for (std::size_t c = 1; c < only.size(); ++c) CHECK(only[c].percent == 0.0);

  std::vector<std::int32_t> all(12);
  std::iota(all.begin(), all.end(), 0);
  CHECK(SumPercent(Breakdown(pop, all, "ethnicity")) ==
        doctest::Approx(100.0).epsilon(1e-12));
  const std::vector<Share> ages = Breakdown(pop, all, "age_band");
  CHECK(ages.size() == kNumAgeBands);
  CHECK(SumPercent(ages) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK_THROWS_AS(Breakdown(pop, all, "income"), UnknownAttribute);

  SUBCASE("reporting downweights vaccinated infections") {
    pop.agents[0].vaccinated = true;  // Maori
    const std::vector<std::int32_t> two{0, 1};
    const std::vector<Share> s = Breakdown(pop, two, "ethnicity", 0.75);
    CHECK(s[0].percent == doctest::Approx(20.0));
    CHECK(s[1].percent == doctest::Approx(80.0));
  }
}

TEST_CASE("uniform mixing gives equal group shares") {
  const int n = 300;
  std::vector<int> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  Population pop = diffabm::testing::Households(n, {everyone});
  for (Agent& a : pop.agents) {
    a.ethnicity = static_cast<Ethnicity>(a.id % kNumEthnicities);
  }
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  DiseaseParams p = diffabm::testing::FastParams();
  p.beta = 0.02;
  p.R = 0.002;
  std::vector<std::int32_t> infected;
  SimOptions o;
  o.horizon_days = 40;
  for (std::uint64_t s = 0; s < 60; ++s) {
    o.seed = s;
    const EpidemicTrace t =
        Simulate(ctx, ParamTensors::Constant(p), nullptr, {}, o).trace;
    for (int a = 0; a < n; ++a) {
      if (t.infection_day[a] >= 0) infected.push_back(a);
    }
  }
  REQUIRE(infected.size() > 600);
  const std::vector<Share> s = Breakdown(pop, infected, "ethnicity");
  const double q = 1.0 / kNumEthnicities;
  const double sigma = 100.0 * std::sqrt(q * (1 - q) / infected.size());
  for (const Share& x : s) CHECK(std::abs(x.percent - 100.0 * q) < 3 * sigma);
}

TEST_CASE("comparison report") {
  std::vector<double> sim(26, 0.0), obs(26, 0.0);
  // Week 36 is index 10 of a series starting at week 26.
  sim[10] = 119;
  obs[10] = 91;
  sim[9] = 1167 - 119;
  obs[11] = 1024 - 91;
  const ComparisonReport r = MakeComparisonReport(Flat(sim, 26), Obs(obs, 26));
  CHECK(r.peak_sim.week == 35);
  CHECK(r.peak_sim.value == 1048);
  CHECK(r.peak_obs.week == 37);
  CHECK(r.cumulative_sim == 1167);
  CHECK(r.cumulative_obs == 1024);
  CHECK(r.cumulative_difference() == 143);

  SUBCASE("peak fixture") {
    std::vector<double> s2(26, 10.0), o2(26, 10.0);
    s2[10] = 119;
    o2[10] = 91;
    const ComparisonReport p =
        MakeComparisonReport(Flat(s2, 26), Obs(o2, 26));
    CHECK(p.peak_sim.week == 36);
    CHECK(p.peak_sim.value == 119);
    CHECK(p.peak_obs.week == 36);
    CHECK(p.peak_obs.value == 91);
  }
  SUBCASE("identical series") {
    const ComparisonReport same =
        MakeComparisonReport(Flat(obs, 26), Obs(obs, 26));
    CHECK(same.cumulative_difference() == 0.0);
  }
  SUBCASE("week ranges must line up") {
    CHECK_THROWS_AS(MakeComparisonReport(Flat(sim, 26), Obs(obs, 27)),
                    WeekRangeMismatch);
    CHECK_THROWS_AS(MakeComparisonReport(Flat({1, 2}, 26), Obs({1, 2, 3}, 26)),
                    WeekRangeMismatch);
  }
  SUBCASE("json round trips") {
    ComparisonReport full = r;
    Population pop = diffabm::testing::Households(4, {});
    const std::vector<std::int32_t> inf{0, 1, 3};
    full.by_ethnicity = Breakdown(pop, inf, "ethnicity");
    full.by_age_band = Breakdown(pop, inf, "age_band");
    const std::string text = ReportJson(full, "h");
    const ComparisonReport back = ParseReportJson(text, "report.json");
    CHECK(ReportJson(back, "h") == text);
    CHECK(back.sim_q95 == full.sim_q95);
    CHECK(back.by_age_band.size() == kNumAgeBands);
    CHECK_THROWS_AS(ParseReportJson("[]", "x"), DataError);
  }
  SUBCASE("csv outputs") {
    const std::string curves = CurvesCsv(r);
    CHECK(curves.rfind("week_index,observed,sim_mean,sim_q05,sim_q95\n26,0,0,0,0\n", 0) == 0);
    CHECK(curves.find("\n36,91,119,119,119\n") != std::string::npos);
    CHECK(BreakdownCsv(r) == "attribute,category,percent\n");
  }
}
