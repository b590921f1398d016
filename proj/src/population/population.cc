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


#include "diffabm/population.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <unordered_map>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"
#include "diffabm/rng.h"

namespace diffabm {
namespace {

constexpr std::array<std::string_view, kNumAgeBands> kAgeBandNames{
    "0-4", "5-11", "12-17", "18-24", "25-44", "45-64", "65+"};
constexpr std::array<int, kNumAgeBands + 1> kAgeBandStart{0,  5,  12, 18,
                                                          25, 45, 65, 96};
constexpr std::array<std::string_view, kNumSexes> kSexNames{"female", "male"};
constexpr std::array<std::string_view, kNumEthnicities> kEthnicityNames{
    "Maori", "Pacific", "Asian", "European", "MELAA", "Other"};
constexpr std::array<std::string_view, kNumVenueKinds> kVenueKindNames{
    "household", "school", "workplace", "pub", "cinema", "other"};

constexpr int kSchoolAgeMin = 5;
constexpr int kSchoolAgeMax = 18;
constexpr int kWorkAgeMin = 19;
constexpr int kWorkAgeMax = 64;
constexpr int kAdultAge = 18;

constexpr char kAgentsHeader[] =
    "agent_id,age,sex,ethnicity,vaccinated,household_id,school_id,work_id,"
    "region";
constexpr char kVenuesHeader[] = "venue_id,kind,region";
constexpr char kMembershipsHeader[] = "agent_id,venue_id";

template <std::size_t N>
int LookupIndex(const std::array<std::string_view, N>& names,
                std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<int>(i);
  }
  return -1;
}

// Index drawn from unnormalised nonnegative weights.
std::size_t Categorical(std::span<const double> w, Rng& rng) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double u = rng.Uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  std::size_t last = w.size() - 1;
  while (last > 0 && w[last] == 0.0) --last;
  return last;
}

double GeometricMean(double p, int k) {
  double num = 0.0, den = 0.0, w = 1.0;
  for (int s = 1; s <= k; ++s) {
    num += s * w;
    den += w;
    w *= 1.0 - p;
  }
  return num / den;
}

std::vector<double> TruncatedGeometric(double mean, int k) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (GeometricMean(mid, k) > mean ? lo : hi) = mid;
  }
  const double p = 0.5 * (lo + hi);
  std::vector<double> w(k);
  double x = 1.0;
  for (int s = 0; s < k; ++s, x *= 1.0 - p) w[s] = x;
  return w;
}

void CheckDistribution(std::span<const double> w, const char* what) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidSpec(std::string(what) + ": negative or non-finite weight");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidSpec(std::string(what) + ": weights sum to " +
                      std::to_string(total) + ", expected 1");
  }
}

void CheckUnit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidSpec(std::string(what) + " must be in [0, 1]");
  }
}

// Venues of one kind with a region-aware chooser.
struct VenuePool {
  std::vector<std::vector<std::int32_t>> by_region;
  std::vector<std::int32_t> all;

  std::int32_t Pick(std::int32_t region, Rng& rng) const {
    const auto& local = by_region[region];
    const auto& from = local.empty() ? all : local;
    if (from.empty()) return kNoVenue;
    return from[rng.Index(from.size())];
  }
};

VenuePool AddVenues(Population& pop, VenueKind kind, int count) {
  VenuePool pool;
  pool.by_region.resize(pop.regions.size());
  for (int j = 0; j < count; ++j) {
    Venue v;
    v.kind = kind;
    v.region = static_cast<std::int32_t>(j % pop.regions.size());
    const auto index = static_cast<std::int32_t>(pop.venues.size());
    pool.by_region[v.region].push_back(index);
    pool.all.push_back(index);
    pop.venues.push_back(std::move(v));
  }
  return pool;
}

void DropEmptyVenues(Population& pop) {
  pop.RebuildMembers();
  std::vector<std::int32_t> remap(pop.venues.size(), kNoVenue);
  std::vector<Venue> kept;
  for (std::size_t v = 0; v < pop.venues.size(); ++v) {
    if (pop.venues[v].members.empty()) continue;
    remap[v] = static_cast<std::int32_t>(kept.size());
    kept.push_back(std::move(pop.venues[v]));
    kept.back().id = remap[v];
  }
  pop.venues = std::move(kept);
  for (Agent& a : pop.agents) {
    for (auto& slot : a.venue) {
      if (slot != kNoVenue) slot = remap[slot];
    }
  }
}

}  // namespace

int AgeBand(int age) {
  for (int b = kNumAgeBands - 1; b >= 0; --b) {
    if (age >= kAgeBandStart[b]) return b;
  }
  return 0;
}

std::string_view AgeBandName(int band) { return kAgeBandNames.at(band); }
std::string_view SexName(Sex s) { return kSexNames[static_cast<int>(s)]; }
std::string_view EthnicityName(Ethnicity e) {
  return kEthnicityNames[static_cast<int>(e)];
}
std::string_view VenueKindName(VenueKind k) {
  return kVenueKindNames[static_cast<int>(k)];
}

std::optional<Sex> ParseSex(std::string_view s) {
  const int i = LookupIndex(kSexNames, s);
  if (i < 0) return std::nullopt;
  return static_cast<Sex>(i);
}
std::optional<Ethnicity> ParseEthnicity(std::string_view s) {
  const int i = LookupIndex(kEthnicityNames, s);
  if (i < 0) return std::nullopt;
  return static_cast<Ethnicity>(i);
}
std::optional<VenueKind> ParseVenueKind(std::string_view s) {
  const int i = LookupIndex(kVenueKindNames, s);
  if (i < 0) return std::nullopt;
  return static_cast<VenueKind>(i);
}

void Population::RebuildMembers() {
  for (Venue& v : venues) v.members.clear();
  for (std::size_t a = 0; a < agents.size(); ++a) {
    for (std::int32_t v : agents[a].venue) {
      if (v != kNoVenue) {
        venues.at(v).members.push_back(static_cast<std::int32_t>(a));
      }
    }
  }
}

std::int32_t Population::RegionIndex(std::string_view label) const {
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r] == label) return static_cast<std::int32_t>(r);
  }
  return -1;
}

void Population::Validate() const {
  if (agents.empty()) throw IntegrityError("population has no agents");
  const auto nr = static_cast<std::int32_t>(regions.size());
  std::vector<std::size_t> degree(venues.size(), 0);
  for (const Agent& a : agents) {
    const std::string who = "agent " + std::to_string(a.id);
    if (a.age < 0 || a.age > kMaxAge) throw IntegrityError(who + ": bad age");
    if (a.region < 0 || a.region >= nr) {
      throw IntegrityError(who + ": bad region");
    }
    if (a.household() == kNoVenue) {
      throw IntegrityError(who + ": no household");
    }
    for (int k = 0; k < kNumVenueKinds; ++k) {
      const std::int32_t v = a.venue[k];
      if (v == kNoVenue) continue;
      if (v < 0 || static_cast<std::size_t>(v) >= venues.size()) {
        throw IntegrityError(who + ": dangling venue reference");
      }
      if (static_cast<int>(venues[v].kind) != k) {
        throw IntegrityError(who + ": venue " + std::to_string(venues[v].id) +
                             " is not a " +
                             std::string(kVenueKindNames[k]));
      }
      ++degree[v];
    }
  }
  for (std::size_t v = 0; v < venues.size(); ++v) {
    const Venue& venue = venues[v];
    if (venue.members.empty()) {
      throw IntegrityError("venue " + std::to_string(venue.id) +
                           " has no members");
    }
    if (venue.members.size() != degree[v]) {
      throw IntegrityError("venue " + std::to_string(venue.id) +
                           ": member list out of sync");
    }
    if (venue.region < 0 || venue.region >= nr) {
      throw IntegrityError("venue " + std::to_string(venue.id) +
                           ": bad region");
    }
  }
}

bool operator==(const Agent& a, const Agent& b) {
  return a.id == b.id && a.age == b.age && a.sex == b.sex &&
         a.ethnicity == b.ethnicity && a.vaccinated == b.vaccinated &&
         a.region == b.region && a.venue == b.venue;
}

bool operator==(const Venue& a, const Venue& b) {
  return a.id == b.id && a.kind == b.kind && a.region == b.region &&
         a.members == b.members;
}

// Region indices are compared through their labels, since a loaded
// population only knows the regions that appear in its files.
bool operator==(const Population& a, const Population& b) {
  if (a.agents.size() != b.agents.size() ||
      a.venues.size() != b.venues.size()) {
    return false;
  }
  auto same = [&](std::int32_t ra, std::int32_t rb) {
    return a.regions.at(ra) == b.regions.at(rb);
  };
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    Agent x = a.agents[i], y = b.agents[i];
    if (!same(x.region, y.region)) return false;
    x.region = y.region = 0;
    if (!(x == y)) return false;
  }
  for (std::size_t i = 0; i < a.venues.size(); ++i) {
    const Venue& x = a.venues[i];
    const Venue& y = b.venues[i];
    if (!same(x.region, y.region) || x.id != y.id || x.kind != y.kind ||
        x.members != y.members) {
      return false;
    }
  }
  return true;
}

void PopulationSpec::Validate() const {
  if (n_agents < 1) throw InvalidSpec("n_agents must be >= 1");
  if (regions.empty()) throw InvalidSpec("at least one region is required");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string& r = regions[i];
    if (r.empty() || r.find_first_of(",\r\n") != std::string::npos) {
      throw InvalidSpec("region labels must be non-empty and comma-free");
    }
    if (std::find(regions.begin(), regions.begin() + i, r) !=
        regions.begin() + i) {
      throw InvalidSpec("duplicate region label '" + r + "'");
    }
  }
  if (!household_size_weights.empty()) {
    CheckDistribution(household_size_weights, "household_size_weights");
  } else {
    if (max_household_size < 1) {
      throw InvalidSpec("max_household_size must be >= 1");
    }
    const double upper = (max_household_size + 1) / 2.0;
    if (!(mean_household_size >= 1.0 &&
          (mean_household_size < upper || max_household_size == 1))) {
      throw InvalidSpec("mean_household_size must be in [1, " +
                        std::to_string(upper) + ")");
    }
  }
  if (school_count < 0 || workplace_count < 0 || pub_count < 0 ||
      cinema_count < 0 || other_count < 0) {
    throw InvalidSpec("venue counts must be >= 0");
  }
  CheckUnit(employment_fraction, "employment_fraction");
  CheckUnit(pub_fraction, "pub_fraction");
  CheckUnit(cinema_fraction, "cinema_fraction");
  CheckUnit(other_fraction, "other_fraction");
  CheckDistribution(age_marginal, "age_marginal");
  CheckDistribution(sex_marginal, "sex_marginal");
  CheckDistribution(ethnicity_marginal, "ethnicity_marginal");
  for (double c : vaccination_coverage) CheckUnit(c, "vaccination_coverage");
}

Population GenerateSynthetic(const PopulationSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  Population pop;
  pop.regions = spec.regions;
  const std::vector<double> size_weights =
      spec.household_size_weights.empty()
          ? TruncatedGeometric(spec.mean_household_size,
                               spec.max_household_size)
          : spec.household_size_weights;

  std::int64_t remaining = spec.n_agents;
  while (remaining > 0) {
    const auto size = std::min<std::int64_t>(
        static_cast<std::int64_t>(Categorical(size_weights, rng)) + 1,
        remaining);
    remaining -= size;
    Venue house;
    house.kind = VenueKind::kHousehold;
    house.region = static_cast<std::int32_t>(rng.Index(pop.regions.size()));
    const auto eth =
        static_cast<Ethnicity>(Categorical(spec.ethnicity_marginal, rng));
    const auto house_index = static_cast<std::int32_t>(pop.venues.size());
    pop.venues.push_back(house);
    for (std::int64_t m = 0; m < size; ++m) {
      Agent a;
      a.id = static_cast<std::int64_t>(pop.agents.size());
      const auto band = static_cast<int>(Categorical(spec.age_marginal, rng));
      const int lo = kAgeBandStart[band];
      const int hi = kAgeBandStart[band + 1] - 1;
      a.age = lo + static_cast<int>(rng.Index(hi - lo + 1));
      a.sex = static_cast<Sex>(Categorical(spec.sex_marginal, rng));
      a.ethnicity = eth;
      a.vaccinated = rng.Bernoulli(spec.vaccination_coverage[band]);
      a.region = house.region;
      a.venue[0] = house_index;
      pop.agents.push_back(a);
    }
  }

  const VenuePool schools =
      AddVenues(pop, VenueKind::kSchool, spec.school_count);
  const VenuePool works =
      AddVenues(pop, VenueKind::kWorkplace, spec.workplace_count);
  const VenuePool pubs = AddVenues(pop, VenueKind::kPub, spec.pub_count);
  const VenuePool cinemas =
      AddVenues(pop, VenueKind::kCinema, spec.cinema_count);
  const VenuePool others = AddVenues(pop, VenueKind::kOther, spec.other_count);
  auto slot = [](VenueKind k) { return static_cast<int>(k); };

  for (Agent& a : pop.agents) {
    if (a.age >= kSchoolAgeMin && a.age <= kSchoolAgeMax) {
      a.venue[slot(VenueKind::kSchool)] = schools.Pick(a.region, rng);
    }
    if (a.age >= kWorkAgeMin && a.age <= kWorkAgeMax &&
        rng.Bernoulli(spec.employment_fraction)) {
      a.venue[slot(VenueKind::kWorkplace)] = works.Pick(a.region, rng);
    }
    if (a.age >= kAdultAge && rng.Bernoulli(spec.pub_fraction)) {
      a.venue[slot(VenueKind::kPub)] = pubs.Pick(a.region, rng);
    }
    if (a.age >= kAdultAge && rng.Bernoulli(spec.cinema_fraction)) {
      a.venue[slot(VenueKind::kCinema)] = cinemas.Pick(a.region, rng);
    }
    if (rng.Bernoulli(spec.other_fraction)) {
      a.venue[slot(VenueKind::kOther)] = others.Pick(a.region, rng);
    }
  }
  DropEmptyVenues(pop);
  pop.RebuildMembers();
  return pop;
}

void WritePopulation(const Population& pop, const std::filesystem::path& dir) {
  pop.Validate();
  auto id = [&](std::int32_t v) {
    return v == kNoVenue ? std::string() : std::to_string(pop.venues[v].id);
  };
  std::ostringstream agents, venues, memberships;
  agents << kAgentsHeader << '\n';
  venues << kVenuesHeader << '\n';
  memberships << kMembershipsHeader << '\n';
  for (const Agent& a : pop.agents) {
    agents << a.id << ',' << a.age << ',' << SexName(a.sex) << ','
           << EthnicityName(a.ethnicity) << ',' << (a.vaccinated ? 1 : 0)
           << ',' << id(a.venue[0]) << ','
           << id(a.venue[static_cast<int>(VenueKind::kSchool)]) << ','
           << id(a.venue[static_cast<int>(VenueKind::kWorkplace)]) << ','
           << pop.regions[a.region] << '\n';
    for (VenueKind k : {VenueKind::kPub, VenueKind::kCinema, VenueKind::kOther}) {
      const std::int32_t v = a.venue[static_cast<int>(k)];
      if (v != kNoVenue) memberships << a.id << ',' << id(v) << '\n';
    }
  }
  for (const Venue& v : pop.venues) {
    venues << v.id << ',' << VenueKindName(v.kind) << ','
           << pop.regions[v.region] << '\n';
  }
  io::WriteFile(dir / "agents.csv", agents.str());
  io::WriteFile(dir / "venues.csv", venues.str());
  io::WriteFile(dir / "memberships.csv", memberships.str());
}

Population LoadPopulation(const std::filesystem::path& dir) {
  Population pop;
  auto region_of = [&](const std::string& label) {
    std::int32_t r = pop.RegionIndex(label);
    if (r < 0) {
      r = static_cast<std::int32_t>(pop.regions.size());
      pop.regions.push_back(label);
    }
    return r;
  };

  const io::CsvFile agents(dir / "agents.csv", kAgentsHeader);
  if (agents.rows().empty()) {
    throw ParseError(agents.name(), 2, "no agent rows");
  }
  const io::CsvFile venues(dir / "venues.csv", kVenuesHeader);

  std::unordered_map<std::int64_t, std::int32_t> venue_index;
  for (const io::CsvRow& row : venues.rows()) {
    Venue v;
    v.id = venues.Int(row, 0);
    const auto kind = ParseVenueKind(row.fields[1]);
    if (!kind) venues.Fail(row, "unknown venue kind '" + row.fields[1] + "'");
    if (row.fields[2].empty()) venues.Fail(row, "empty region");
    v.kind = *kind;
    v.region = region_of(row.fields[2]);
    if (!venue_index.emplace(v.id, pop.venues.size()).second) {
      throw IntegrityError(venues.name() + ":" + std::to_string(row.line) +
                           ": duplicate venue id " + std::to_string(v.id));
    }
    pop.venues.push_back(std::move(v));
  }

  auto resolve = [&](const io::CsvFile& file, const io::CsvRow& row,
                     std::int64_t vid, VenueKind want) -> std::int32_t {
    if (vid < 0) return kNoVenue;
    const auto it = venue_index.find(vid);
    const std::string where = file.name() + ":" + std::to_string(row.line);
    if (it == venue_index.end()) {
      throw IntegrityError(where + ": unknown venue id " +
                           std::to_string(vid));
    }
    if (pop.venues[it->second].kind != want) {
      throw IntegrityError(where + ": venue " + std::to_string(vid) +
                           " is not a " + std::string(VenueKindName(want)));
    }
    return it->second;
  };

  std::unordered_map<std::int64_t, std::int32_t> agent_index;
  for (const io::CsvRow& row : agents.rows()) {
    Agent a;
    a.id = agents.Int(row, 0);
    const std::int64_t age = agents.Int(row, 1);
    if (age < 0 || age > kMaxAge) agents.Fail(row, "age out of [0, 100]");
    a.age = static_cast<int>(age);
    const auto sex = ParseSex(row.fields[2]);
    if (!sex) agents.Fail(row, "unknown sex '" + row.fields[2] + "'");
    a.sex = *sex;
    const auto eth = ParseEthnicity(row.fields[3]);
    if (!eth) agents.Fail(row, "unknown ethnicity '" + row.fields[3] + "'");
    a.ethnicity = *eth;
    if (row.fields[4] != "0" && row.fields[4] != "1") {
      agents.Fail(row, "vaccinated must be 0 or 1");
    }
    a.vaccinated = row.fields[4] == "1";
    if (row.fields[5].empty()) agents.Fail(row, "missing household_id");
    a.venue[0] =
        resolve(agents, row, agents.OptionalInt(row, 5), VenueKind::kHousehold);
    a.venue[static_cast<int>(VenueKind::kSchool)] =
        resolve(agents, row, agents.OptionalInt(row, 6), VenueKind::kSchool);
    a.venue[static_cast<int>(VenueKind::kWorkplace)] = resolve(
        agents, row, agents.OptionalInt(row, 7), VenueKind::kWorkplace);
    if (row.fields[8].empty()) agents.Fail(row, "empty region");
    a.region = region_of(row.fields[8]);
    if (!agent_index.emplace(a.id, pop.agents.size()).second) {
      throw IntegrityError(agents.name() + ":" + std::to_string(row.line) +
                           ": duplicate agent id " + std::to_string(a.id));
    }
    pop.agents.push_back(a);
  }

  if (std::filesystem::exists(dir / "memberships.csv")) {
    const io::CsvFile members(dir / "memberships.csv", kMembershipsHeader);
    for (const io::CsvRow& row : members.rows()) {
      const std::int64_t aid = members.Int(row, 0);
      const auto ait = agent_index.find(aid);
      const std::string where =
          members.name() + ":" + std::to_string(row.line);
      if (ait == agent_index.end()) {
        throw IntegrityError(where + ": unknown agent id " +
                             std::to_string(aid));
      }
      const std::int64_t vid = members.Int(row, 1);
      const auto vit = venue_index.find(vid);
      if (vit == venue_index.end()) {
        throw IntegrityError(where + ": unknown venue id " +
                             std::to_string(vid));
      }
      const VenueKind kind = pop.venues[vit->second].kind;
      if (kind != VenueKind::kPub && kind != VenueKind::kCinema &&
          kind != VenueKind::kOther) {
        throw IntegrityError(where + ": " + std::string(VenueKindName(kind)) +
                             " membership belongs in agents.csv");
      }
      auto& slot = pop.agents[ait->second].venue[static_cast<int>(kind)];
      if (slot != kNoVenue) {
        throw IntegrityError(where + ": agent " + std::to_string(aid) +
                             " already has a " +
                             std::string(VenueKindName(kind)));
      }
      slot = vit->second;
    }
  }
  pop.RebuildMembers();
  pop.Validate();
  return pop;
}

ContactGraph::ContactGraph(const Population& pop)
    : agent_count_(pop.size()) {
  pop.Validate();
  agent_offsets_.reserve(pop.size() + 1);
  agent_offsets_.push_back(0);
  for (std::size_t a = 0; a < pop.size(); ++a) {
    const Agent& agent = pop.agents[a];
    for (int k = 0; k < kNumVenueKinds; ++k) {
      if (agent.venue[k] == kNoVenue) continue;
      edge_agent_.push_back(static_cast<std::int32_t>(a));
      edge_venue_.push_back(agent.venue[k]);
      edge_kind_.push_back(k);
    }
    agent_offsets_.push_back(edge_agent_.size());
  }
  venue_kind_.reserve(pop.venues.size());
  venue_region_.reserve(pop.venues.size());
  for (const Venue& v : pop.venues) {
    venue_kind_.push_back(v.kind);
    venue_region_.push_back(v.region);
  }
  by_agent_ =
      std::make_shared<kernels::SegmentIndex>(edge_agent_, agent_count_);
  by_venue_ = std::make_shared<kernels::SegmentIndex>(edge_venue_,
                                                      venue_kind_.size());
  by_kind_ =
      std::make_shared<kernels::SegmentIndex>(edge_kind_, kNumVenueKinds);
}

}  // namespace diffabm
