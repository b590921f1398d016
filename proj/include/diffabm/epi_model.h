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


#ifndef DIFFABM_EPI_MODEL_H_
#define DIFFABM_EPI_MODEL_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "diffabm/autodiff/ops.h"
#include "diffabm/autodiff/sampling.h"
#include "diffabm/interventions.h"
#include "diffabm/population.h"
#include "diffabm/rng.h"

namespace diffabm {

using ad::Tensor;

// Contact intensity and frequency per venue kind, indexed by VenueKind.
struct VenueKindParams {
  std::array<double, kNumVenueKinds> rho{1, 1, 1, 1, 1, 1};
  std::array<double, kNumVenueKinds> q{1, 1, 1, 1, 1, 1};
};

// Multiplicative susceptibility factors. The reference category of each
// attribute (age 25-44, female, European, unvaccinated) is pinned to 1.
struct AttributeFactors {
  static constexpr int kAgeReference = 4;
  static constexpr int kSexReference = 0;
  static constexpr int kEthnicityReference = 3;
  static constexpr int kVaccinationReference = 0;

  std::array<double, kNumAgeBands> age{1, 1, 1, 1, 1, 1, 1};
  std::array<double, kNumSexes> sex{1, 1};
  std::array<double, kNumEthnicities> ethnicity{1, 1, 1, 1, 1, 1};
  std::array<double, 2> vaccination{1, 1};
};

struct DiseaseParams {
  double beta = 1e-5;
  double phi = 0.0;  // used when no modulator drives it
  double theta_ei = 10.0;
  double theta_ir = 18.0;
  double gamma_shape = 2.0;
  double gamma_scale = 1.0;
  double R = 0.05;
  VenueKindParams venue;
  double psi1 = 0.9;
  double psi2 = 0.9;
  AttributeFactors attr;

  // DomainError if any range constraint fails.
  void Validate() const;
};

// Differentiable counterpart of DiseaseParams. Vector-valued entries are
// indexed like their DiseaseParams arrays.
struct ParamTensors {
  Tensor beta, phi, theta_ei, theta_ir, gamma_shape, gamma_scale, R;
  Tensor rho, q;  // [6]
  Tensor psi1, psi2;
  Tensor attr_age, attr_sex, attr_ethnicity, attr_vaccination;

  static ParamTensors Constant(const DiseaseParams& p);
  DiseaseParams Values() const;
};

// One LSTM cell over a scalar input plus a two-output head. Each gate matrix
// is [hidden, 1 + hidden] acting on [x; h], gate order input, forget,
// output, candidate.
struct ModulatorWeights {
  int hidden = 16;
  double phi_max = 0.01;
  std::array<std::vector<double>, 4> w;
  std::array<std::vector<double>, 4> b;
  std::vector<double> head_r;
  std::vector<double> head_phi;
  double bias_r = 0.0;
  double bias_phi = 0.0;

  static ModulatorWeights Zero(int hidden, double phi_max);
};

struct ModulatorTensors {
  int hidden = 16;
  double phi_max = 0.01;
  std::array<Tensor, 4> w;
  std::array<Tensor, 4> b;
  Tensor head_r, head_phi, bias_r, bias_phi;

  static ModulatorTensors Constant(const ModulatorWeights& m);
  ModulatorWeights Values() const;
};

// Flat views used by calibration and gradient checks. The disease layout
// is beta, phi, theta_ei, theta_ir, gamma_shape, gamma_scale, R, rho[6],
// q[6], psi1, psi2, age[7], sex[2], ethnicity[6], vaccination[2]. The
// modulator layout is w[0..3], b[0..3], head_r, head_phi, bias_r, bias_phi.
const std::vector<std::string>& ParamNames();
std::vector<double> Flatten(const DiseaseParams& p);
DiseaseParams UnflattenParams(std::span<const double> flat);
// Slices of a tracked flat vector, so gradients land on `flat`.
ParamTensors ParamTensorsFromFlat(const Tensor& flat);

std::size_t ModulatorSize(int hidden);
std::vector<double> Flatten(const ModulatorWeights& m);
ModulatorWeights UnflattenModulator(std::span<const double> flat, int hidden,
                                    double phi_max);
ModulatorTensors ModulatorTensorsFromFlat(const Tensor& flat, int hidden,
                                          double phi_max);

struct LstmOutput {
  Tensor h, c;
  Tensor r_multiplier;  // in (0, 2)
  Tensor phi;           // in [0, phi_max]
};

// Standard LSTM cell update followed by the bounded output head.
// ShapeMismatch on inconsistent shapes.
LstmOutput LstmStep(const ModulatorTensors& m, const Tensor& h,
                    const Tensor& c, const Tensor& x);

// Normalized Gamma density g(t)/g(mode) times the smooth window
// sigmoid(k (t - theta_ei)) * sigmoid(k (theta_ir - t)). All t must be
// positive and the shape above 1 so the density has an interior mode.
Tensor InfectiousnessProfile(const Tensor& t, const Tensor& shape,
                             const Tensor& scale, const Tensor& theta_ei,
                             const Tensor& theta_ir, double sharpness);
// The same density without the window.
Tensor GammaProfile(const Tensor& t, const Tensor& shape, const Tensor& scale);

// Per-agent seed indicators. Agents outside `restriction` (all agents if it
// is empty) are exactly 0. DomainError if beta is outside [0, 1] or an id is
// out of range.
Tensor SeedInitialInfections(const Tensor& beta, std::size_t n_agents,
                             std::span<const std::int32_t> restriction,
                             double temperature, Rng& rng, bool hard);

// Exactly `count` distinct agents drawn uniformly from `restriction` (or
// all agents). Not differentiable.
Tensor SeedFixedCount(std::size_t n_agents,
                      std::span<const std::int32_t> restriction,
                      std::int64_t count, Rng& rng);

// Background infections: mask * Bernoulli(phi) per agent. DomainError if phi
// is outside [0, 1).
Tensor RandomInfections(const Tensor& phi, const Tensor& susceptible_mask,
                        double temperature, Rng& rng, bool hard);

// 1 - exp(-sum of edge rates per agent).
Tensor AggregateExposure(const Tensor& edge_rates,
                         const ad::SegmentIndexPtr& by_agent);

// Static per-run structure shared by every simulation on one population.
class ModelContext {
 public:
  ModelContext(const Population& pop, const ContactGraph& graph);

  const Population& population() const { return *pop_; }
  const ContactGraph& graph() const { return *graph_; }
  std::size_t agents() const { return pop_->size(); }
  const ad::SegmentIndexPtr& age_index() const { return age_; }
  const ad::SegmentIndexPtr& sex_index() const { return sex_; }
  const ad::SegmentIndexPtr& ethnicity_index() const { return ethnicity_; }
  const std::vector<double>& initial_vaccination() const { return vacc0_; }

 private:
  const Population* pop_;
  const ContactGraph* graph_;
  ad::SegmentIndexPtr age_, sex_, ethnicity_;
  std::vector<double> vacc0_;
};

// Per-edge rates: for each (susceptible agent a, venue V) membership, the sum
// over other members j of V of the pairwise rate
//   R * R_t * h_attr(a) * (1 - psi1 vacc_a) * C_sus(a)
//     * (rho/q)_kind * open(V) * profile_j * (1 - psi2 vacc_j) * C_inf(j).
Tensor EdgeTransmissionRates(const ModelContext& ctx, const ParamTensors& p,
                             const Tensor& infectiousness,
                             std::span<const double> vaccinated,
                             const ControlModifier& control,
                             const Tensor& r_multiplier);

struct SimOptions {
  int horizon_days = 70;
  Mode mode = Mode::kHard;
  double temperature = ad::kDefaultTemperature;
  double gate_sharpness = 4.0;
  std::vector<std::int32_t> seed_restriction;  // empty: all agents
  std::optional<std::int64_t> seed_count;      // exact seeding override
  std::uint64_t seed = 0;
  // Seeds the initial-infection draw separately, so runs with different
  // `seed` can share their initial infectors.
  std::optional<std::uint64_t> seeding_seed;
};

struct EpidemicTrace {
  std::vector<double> new_infections;
  std::vector<double> S, E, I, R;
  std::vector<double> r_multiplier;
  std::vector<double> phi;
  // Day each agent was infected, -1 if never. Relaxed runs report the first
  // day the agent's cumulative infection weight reached 1/2.
  std::vector<int> infection_day;

  int days() const { return static_cast<int>(new_infections.size()); }
};

struct SimResult {
  EpidemicTrace trace;
  Tensor daily_incidence;  // [days], differentiable
  PolicyState policy_state{0, 0};
  std::vector<double> final_vaccination;
};

// One simulation run, advanced a day at a time.
class Simulation {
 public:
  Simulation(const ModelContext& ctx, const ParamTensors& params,
             const ModulatorTensors* modulator, const PolicySet& policies,
             const SimOptions& options);

  // Day 0: initial infections. Must be called once, before Step.
  void Seed();
  // Advances to the next day. InconsistentState if occupancy breaks.
  void Step();
  int day() const { return day_; }
  const Tensor& cumulative() const { return cumulative_; }
  const std::vector<int>& infection_day() const { return infection_day_; }
  const PolicyState& policy_state() const { return policy_; }
  const std::vector<double>& vaccination() const { return vacc_; }
  SimResult Finish() &&;

 private:
  void UpdateModulator();
  void Record(const Tensor& n);
  ControlModifier Controls();

  const ModelContext& ctx_;
  ParamTensors p_;
  const ModulatorTensors* mod_;
  PolicySet policies_;
  SimOptions opt_;
  bool hard_;
  Rng seed_rng_, contact_rng_, random_rng_;
  PolicyStreams streams_;
  PolicyState policy_;
  std::vector<double> vacc_;
  double theta_ei_, theta_ir_;

  int day_ = -1;
  Tensor profile_;      // [horizon + 1], lag 0 is zero
  Tensor attr_static_;  // age * sex * ethnicity factor per agent
  Tensor cumulative_;   // per-agent cumulative infection
  std::vector<Tensor> history_;
  std::vector<Tensor> daily_;
  std::vector<int> infection_day_;
  Tensor h_, c_, r_mult_, phi_;
  EpidemicTrace trace_;
};

SimResult Simulate(const ModelContext& ctx, const ParamTensors& params,
                   const ModulatorTensors* modulator,
                   const PolicySet& policies, const SimOptions& options);

// Writes trace.csv.
std::string TraceCsv(const EpidemicTrace& trace);

}  // namespace diffabm

#endif  // DIFFABM_EPI_MODEL_H_
