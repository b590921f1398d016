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


#ifndef DIFFABM_POPULATION_H_
#define DIFFABM_POPULATION_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diffabm/autodiff/ops.h"

namespace diffabm {

enum class Sex : std::uint8_t { kFemale, kMale };
enum class Ethnicity : std::uint8_t {
  kMaori,
  kPacific,
  kAsian,
  kEuropean,
  kMelaa,
  kOther
};
enum class VenueKind : std::uint8_t {
  kHousehold,
  kSchool,
  kWorkplace,
  kPub,
  kCinema,
  kOther
};

inline constexpr int kNumSexes = 2;
inline constexpr int kNumEthnicities = 6;
inline constexpr int kNumVenueKinds = 6;
inline constexpr int kNumAgeBands = 7;
inline constexpr int kMaxAge = 100;

// Age bands 0-4, 5-11, 12-17, 18-24, 25-44, 45-64, 65+.
int AgeBand(int age);
std::string_view AgeBandName(int band);
std::string_view SexName(Sex s);
std::string_view EthnicityName(Ethnicity e);
std::string_view VenueKindName(VenueKind k);
// Inverse lookups; std::nullopt for unknown labels.
std::optional<Sex> ParseSex(std::string_view s);
std::optional<Ethnicity> ParseEthnicity(std::string_view s);
std::optional<VenueKind> ParseVenueKind(std::string_view s);

inline constexpr std::int32_t kNoVenue = -1;

struct Agent {
  std::int64_t id = 0;
  int age = 0;
  Sex sex = Sex::kFemale;
  Ethnicity ethnicity = Ethnicity::kEuropean;
  bool vaccinated = false;
  std::int32_t region = 0;
  // Dense venue index per kind, kNoVenue if none. The household slot is
  // always set.
  std::array<std::int32_t, kNumVenueKinds> venue{kNoVenue, kNoVenue, kNoVenue,
                                                 kNoVenue, kNoVenue, kNoVenue};

  std::int32_t household() const { return venue[0]; }
};

struct Venue {
  std::int64_t id = 0;
  VenueKind kind = VenueKind::kHousehold;
  std::int32_t region = 0;
  std::vector<std::int32_t> members;  // dense agent indices, ascending
};

// Agents and venues are addressed by dense index (file order); `id` keeps the
// external identifier.
struct Population {
  std::vector<std::string> regions;
  std::vector<Agent> agents;
  std::vector<Venue> venues;

  std::size_t size() const { return agents.size(); }
  // Recomputes Venue::members from the agents' memberships.
  void RebuildMembers();
  // Throws IntegrityError if any structural invariant fails.
  void Validate() const;
  std::int32_t RegionIndex(std::string_view label) const;  // -1 if absent
};

bool operator==(const Agent& a, const Agent& b);
bool operator==(const Venue& a, const Venue& b);
bool operator==(const Population& a, const Population& b);

struct PopulationSpec {
  std::int64_t n_agents = 1000;
  std::vector<std::string> regions{"region-a"};
  // Either explicit weights for sizes 1..k, or a truncated geometric with
  // the given mean on 1..max_household_size.
  std::vector<double> household_size_weights;
  double mean_household_size = 2.7;
  int max_household_size = 8;
  int school_count = 2;
  int workplace_count = 20;
  int pub_count = 5;
  int cinema_count = 1;
  int other_count = 10;
  double employment_fraction = 0.7;
  // Fraction of adults (18+) with a pub / cinema membership, and of all
  // agents with an "other" venue membership.
  double pub_fraction = 0.3;
  double cinema_fraction = 0.2;
  double other_fraction = 0.5;
  std::array<double, kNumAgeBands> age_marginal{0.06, 0.09, 0.08, 0.10,
                                                0.27, 0.25, 0.15};
  std::array<double, kNumSexes> sex_marginal{0.5, 0.5};
  std::array<double, kNumEthnicities> ethnicity_marginal{0.17, 0.08, 0.15,
                                                         0.55, 0.02, 0.03};
  std::array<double, kNumAgeBands> vaccination_coverage{0.9, 0.9, 0.9, 0.9,
                                                        0.9, 0.9, 0.9};

  // InvalidSpec on bad values.
  void Validate() const;
};

// Deterministic under `seed`. Venues that end up with no members are
// dropped.
Population GenerateSynthetic(const PopulationSpec& spec, std::uint64_t seed);

// agents.csv, venues.csv and memberships.csv (leisure venues) in `dir`.
void WritePopulation(const Population& pop, const std::filesystem::path& dir);
// Reads the same three files; memberships.csv is optional. ParseError on
// malformed rows, IntegrityError on referential problems.
Population LoadPopulation(const std::filesystem::path& dir);

// Bipartite agent-venue graph in edge-list form, one edge per membership,
// ordered by agent then venue kind.
class ContactGraph {
 public:
  explicit ContactGraph(const Population& pop);

  std::size_t agent_count() const { return agent_count_; }
  std::size_t venue_count() const { return venue_kind_.size(); }
  std::size_t edge_count() const { return edge_agent_.size(); }

  const std::vector<std::int32_t>& edge_agent() const { return edge_agent_; }
  const std::vector<std::int32_t>& edge_venue() const { return edge_venue_; }
  const std::vector<std::int32_t>& edge_kind() const { return edge_kind_; }
  // CSR offsets into the edge arrays, one range per agent.
  const std::vector<std::size_t>& agent_offsets() const {
    return agent_offsets_;
  }
  const std::vector<VenueKind>& venue_kind() const { return venue_kind_; }
  const std::vector<std::int32_t>& venue_region() const {
    return venue_region_;
  }
  std::size_t venue_degree(std::size_t v) const {
    return by_venue_->segment_size(v);
  }

  // Segment indices for the differentiable reductions.
  const ad::SegmentIndexPtr& by_agent() const { return by_agent_; }
  const ad::SegmentIndexPtr& by_venue() const { return by_venue_; }
  const ad::SegmentIndexPtr& by_kind() const { return by_kind_; }

 private:
  std::size_t agent_count_ = 0;
  std::vector<std::int32_t> edge_agent_;
  std::vector<std::int32_t> edge_venue_;
  std::vector<std::int32_t> edge_kind_;
  std::vector<std::size_t> agent_offsets_;
  std::vector<VenueKind> venue_kind_;
  std::vector<std::int32_t> venue_region_;
  ad::SegmentIndexPtr by_agent_;
  ad::SegmentIndexPtr by_venue_;
  ad::SegmentIndexPtr by_kind_;
};

}  // namespace diffabm

#endif  // DIFFABM_POPULATION_H_
