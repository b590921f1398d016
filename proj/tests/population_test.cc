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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"
#include "diffabm/population.h"

namespace fs = std::filesystem;
using namespace diffabm;

namespace {

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("diffabm_pop_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void Put(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

Population TwoAgentsOneHouse() {
  Population pop;
  pop.regions = {"r"};
  pop.venues.push_back({0, VenueKind::kHousehold, 0, {}});
  pop.venues.push_back({1, VenueKind::kSchool, 0, {}});
  Agent a;
  a.id = 0;
  a.age = 30;
  a.venue[0] = 0;
  Agent b = a;
  b.id = 1;
  b.age = 8;
  b.venue[static_cast<int>(VenueKind::kSchool)] = 1;
  pop.agents = {a, b};
  pop.RebuildMembers();
  return pop;
}

}  // namespace

TEST_CASE("age bands follow the seven susceptibility categories") {
  CHECK(AgeBand(0) == 0);
  CHECK(AgeBand(4) == 0);
  CHECK(AgeBand(5) == 1);
  CHECK(AgeBand(17) == 2);
  CHECK(AgeBand(18) == 3);
  CHECK(AgeBand(25) == 4);
  CHECK(AgeBand(64) == 5);
  CHECK(AgeBand(65) == 6);
  CHECK(AgeBand(100) == 6);
  CHECK(AgeBandName(6) == "65+");
}

TEST_CASE("label round trips") {
  for (int k = 0; k < kNumVenueKinds; ++k) {
    const auto kind = static_cast<VenueKind>(k);
    CHECK(ParseVenueKind(VenueKindName(kind)) == kind);
  }
  for (int e = 0; e < kNumEthnicities; ++e) {
    const auto eth = static_cast<Ethnicity>(e);
    CHECK(ParseEthnicity(EthnicityName(eth)) == eth);
  }
  CHECK_FALSE(ParseSex("x").has_value());
}

TEST_CASE("single agent gets a single-member household") {
  PopulationSpec spec;
  spec.n_agents = 1;
  const Population pop = GenerateSynthetic(spec, 1);
  REQUIRE(pop.size() == 1);
  const Venue& house = pop.venues[pop.agents[0].household()];
  CHECK(house.kind == VenueKind::kHousehold);
  CHECK(house.members == std::vector<std::int32_t>{0});
  CHECK(std::count_if(pop.venues.begin(), pop.venues.end(), [](auto& v) {
          return v.kind == VenueKind::kHousehold;
        }) == 1);
}

TEST_CASE("vaccinated fraction with uniform 0.9 coverage") {
  PopulationSpec spec;
  spec.n_agents = 10000;
  spec.vaccination_coverage.fill(0.9);
  const Population pop = GenerateSynthetic(spec, 11);
  const double frac =
      std::count_if(pop.agents.begin(), pop.agents.end(),
                    [](const Agent& a) { return a.vaccinated; }) /
      10000.0;
  const double sigma = std::sqrt(0.9 * 0.1 / 10000.0);
  CHECK(frac >= 0.9 - 4 * sigma);
  CHECK(frac <= 0.9 + 4 * sigma);
}

TEST_CASE("marginals are matched in expectation") {
  PopulationSpec spec;
  spec.n_agents = 20000;
  const Population pop = GenerateSynthetic(spec, 5);
  std::array<double, kNumAgeBands> age{};
  std::array<double, kNumSexes> sex{};
  for (const Agent& a : pop.agents) {
    age[AgeBand(a.age)] += 1.0 / pop.size();
    sex[static_cast<int>(a.sex)] += 1.0 / pop.size();
  }
  for (int b = 0; b < kNumAgeBands; ++b) {
    const double p = spec.age_marginal[b];
    CHECK(std::abs(age[b] - p) < 4 * std::sqrt(p * (1 - p) / pop.size()));
  }
  CHECK(std::abs(sex[0] - 0.5) < 4 * std::sqrt(0.25 / pop.size()));
}

TEST_CASE("generated household sizes follow the requested mean") {
  PopulationSpec spec;
  spec.n_agents = 30000;
  spec.mean_household_size = 3.0;
  const Population pop = GenerateSynthetic(spec, 2);
  std::size_t houses = 0;
  for (const Venue& v : pop.venues) {
    if (v.kind != VenueKind::kHousehold) continue;
    ++houses;
    CHECK(v.members.size() <= 8);
  }
  CHECK(std::abs(30000.0 / houses - 3.0) < 0.1);
}

TEST_CASE("membership rules by age") {
  PopulationSpec spec;
  spec.n_agents = 3000;
  const Population pop = GenerateSynthetic(spec, 3);
  const int school = static_cast<int>(VenueKind::kSchool);
  const int work = static_cast<int>(VenueKind::kWorkplace);
  std::size_t pupils = 0, school_age = 0;
  for (const Agent& a : pop.agents) {
    const bool is_school_age = a.age >= 5 && a.age <= 18;
    school_age += is_school_age;
    pupils += a.venue[school] != kNoVenue;
    if (a.venue[school] != kNoVenue) CHECK(is_school_age);
    if (a.venue[work] != kNoVenue) CHECK((a.age >= 19 && a.age <= 64));
  }
  CHECK(pupils == school_age);
}

TEST_CASE("household membership partitions the agents") {
  PopulationSpec spec;
  spec.n_agents = 2000;
  spec.regions = {"a", "b", "c"};
  const Population pop = GenerateSynthetic(spec, 9);
  std::vector<int> seen(pop.size(), 0);
  for (const Venue& v : pop.venues) {
    CHECK_FALSE(v.members.empty());
    if (v.kind != VenueKind::kHousehold) continue;
    for (auto m : v.members) ++seen[m];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  std::set<std::int32_t> regions;
  for (const Agent& a : pop.agents) {
    regions.insert(a.region);
    CHECK(a.region == pop.venues[a.household()].region);
  }
  CHECK(regions.size() == 3);
}

TEST_CASE("generation is deterministic down to the bytes") {
  PopulationSpec spec;
  spec.n_agents = 500;
  const fs::path d1 = ScratchDir("det1");
  const fs::path d2 = ScratchDir("det2");
  WritePopulation(GenerateSynthetic(spec, 42), d1);
  WritePopulation(GenerateSynthetic(spec, 42), d2);
  for (const char* f : {"agents.csv", "venues.csv", "memberships.csv"}) {
    CHECK(Slurp(d1 / f) == Slurp(d2 / f));
  }
  WritePopulation(GenerateSynthetic(spec, 43), d2);
  CHECK(Slurp(d1 / "agents.csv") != Slurp(d2 / "agents.csv"));
}

TEST_CASE("write then load is the identity") {
  PopulationSpec spec;
  spec.n_agents = 800;
  spec.regions = {"north", "south"};
  const Population pop = GenerateSynthetic(spec, 7);
  const fs::path dir = ScratchDir("roundtrip");
  WritePopulation(pop, dir);
  const Population back = LoadPopulation(dir);
  CHECK(back == pop);
}

TEST_CASE("invalid specs are rejected") {
  PopulationSpec spec;
  spec.n_agents = 0;
  CHECK_THROWS_AS(GenerateSynthetic(spec, 1), InvalidSpec);
  spec = {};
  spec.age_marginal[0] += 0.01;
  CHECK_THROWS_AS(GenerateSynthetic(spec, 1), InvalidSpec);
  spec = {};
  spec.vaccination_coverage[2] = 1.5;
  CHECK_THROWS_AS(GenerateSynthetic(spec, 1), InvalidSpec);
  spec = {};
  spec.mean_household_size = 0.5;
  CHECK_THROWS_AS(GenerateSynthetic(spec, 1), InvalidSpec);
  spec = {};
  spec.regions = {"a", "a"};
  CHECK_THROWS_AS(GenerateSynthetic(spec, 1), InvalidSpec);
}

TEST_CASE("loader errors") {
  const fs::path dir = ScratchDir("errors");
  WritePopulation(TwoAgentsOneHouse(), dir);
  const std::string venues = Slurp(dir / "venues.csv");
  const std::string agents = Slurp(dir / "agents.csv");

  SUBCASE("empty agents file") {
    Put(dir / "agents.csv", "");
    CHECK_THROWS_AS(LoadPopulation(dir), ParseError);
  }
  SUBCASE("header only") {
    Put(dir / "agents.csv", agents.substr(0, agents.find('\n') + 1));
    CHECK_THROWS_AS(LoadPopulation(dir), ParseError);
  }
  SUBCASE("missing household") {
    Put(dir / "agents.csv",
        agents + "2,40,male,Asian,0,99,,,r\n");
    CHECK_THROWS_AS(LoadPopulation(dir), IntegrityError);
  }
  SUBCASE("duplicate agent id") {
    Put(dir / "agents.csv", agents + "1,40,male,Asian,0,0,,,r\n");
    CHECK_THROWS_AS(LoadPopulation(dir), IntegrityError);
  }
  SUBCASE("household id pointing at a school") {
    Put(dir / "agents.csv", agents + "2,40,male,Asian,0,1,,,r\n");
    CHECK_THROWS_AS(LoadPopulation(dir), IntegrityError);
  }
  SUBCASE("venue without members") {
    Put(dir / "venues.csv", venues + "5,pub,r\n");
    CHECK_THROWS_AS(LoadPopulation(dir), IntegrityError);
  }
  SUBCASE("bad field reports its line") {
    Put(dir / "agents.csv", agents + "2,abc,male,Asian,0,0,,,r\n");
    try {
      LoadPopulation(dir);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("age out of range") {
    Put(dir / "agents.csv", agents + "2,101,male,Asian,0,0,,,r\n");
    CHECK_THROWS_AS(LoadPopulation(dir), ParseError);
  }
  SUBCASE("second pub membership") {
    Put(dir / "venues.csv", venues + "5,pub,r\n6,pub,r\n");
    Put(dir / "memberships.csv", "agent_id,venue_id\n0,5\n0,6\n");
    CHECK_THROWS_AS(LoadPopulation(dir), IntegrityError);
  }
}

TEST_CASE("contact graph of two agents sharing a household") {
  const Population pop = TwoAgentsOneHouse();
  const ContactGraph g(pop);
  CHECK(g.edge_count() == 3);
  CHECK(g.venue_degree(0) == 2);
  CHECK(g.venue_degree(1) == 1);
  CHECK(g.agent_offsets() == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("contact graph counts match a brute-force recount") {
  PopulationSpec spec;
  spec.n_agents = 1000;
  const Population pop = GenerateSynthetic(spec, 21);
  const ContactGraph g(pop);
  std::size_t members = 0;
  for (const Venue& v : pop.venues) members += v.members.size();
  CHECK(g.edge_count() == members);
  std::map<std::int32_t, std::size_t> degree;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const std::int32_t a = g.edge_agent()[e];
    const std::int32_t v = g.edge_venue()[e];
    ++degree[v];
    // Bipartite: endpoints are an agent index and a venue index, and the
    // edge's kind is the venue's kind.
    CHECK(a >= 0);
    CHECK(static_cast<std::size_t>(a) < pop.size());
    CHECK(static_cast<int>(g.venue_kind()[v]) == g.edge_kind()[e]);
    CHECK(std::find(pop.venues[v].members.begin(),
                    pop.venues[v].members.end(),
                    a) != pop.venues[v].members.end());
  }
  for (std::size_t v = 0; v < pop.venues.size(); ++v) {
    CHECK(g.venue_degree(v) == pop.venues[v].members.size());
    CHECK(degree[static_cast<std::int32_t>(v)] == pop.venues[v].members.size());
  }
  for (std::size_t a = 0; a < pop.size(); ++a) {
    CHECK(g.agent_offsets()[a + 1] > g.agent_offsets()[a]);
    CHECK(g.edge_kind()[g.agent_offsets()[a]] == 0);
  }
}
