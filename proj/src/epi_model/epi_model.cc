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


#include "diffabm/epi_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"

namespace diffabm {
namespace {

using ad::Concat;
using ad::Exp;
using ad::Gather;
using ad::Log;
using ad::MatVec;
using ad::SegmentSum;
using ad::Sigmoid;
using ad::Sum;
using ad::Tanh;

constexpr int kWeek = 7;

void Require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

template <std::size_t N>
void RequirePositive(const std::array<double, N>& v, const char* what) {
  for (double x : v) {
    Require(std::isfinite(x) && x > 0.0, std::string(what) + " must be > 0");
  }
}

template <std::size_t N>
Tensor ArrayTensor(const std::array<double, N>& a) {
  return Tensor::Constant(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> ToArray(const Tensor& t) {
  if (t.numel() != N) throw ShapeMismatch("parameter vector has wrong length");
  std::array<double, N> out;
  std::copy(t.values().begin(), t.values().end(), out.begin());
  return out;
}

std::vector<double> ToVector(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

// Entry k of a 1-D tensor, differentiably.
Tensor Pick(const Tensor& x, std::size_t k) {
  return Gather(x, std::make_shared<kernels::SegmentIndex>(
                       std::vector<std::int32_t>{static_cast<std::int32_t>(k)},
                       x.numel()));
}

ad::SegmentIndexPtr AttributeIndex(const Population& pop, std::size_t n,
                                   auto key) {
  std::vector<std::int32_t> ids;
  ids.reserve(pop.size());
  for (const Agent& a : pop.agents) ids.push_back(key(a));
  return std::make_shared<kernels::SegmentIndex>(std::move(ids), n);
}

bool AllOnes(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; });
}

Tensor AttributeFactor(const ModelContext& ctx, const ParamTensors& p) {
  return Gather(p.attr_age, ctx.age_index()) *
         Gather(p.attr_sex, ctx.sex_index()) *
         Gather(p.attr_ethnicity, ctx.ethnicity_index());
}

Tensor EdgeRates(const ModelContext& ctx, const ParamTensors& p,
                 const Tensor& attr, const Tensor& infectiousness,
                 std::span<const double> vaccinated,
                 const ControlModifier& control, const Tensor& r_multiplier) {
  const ContactGraph& g = ctx.graph();
  const std::size_t n = ctx.agents();
  if (infectiousness.numel() != n || vaccinated.size() != n) {
    throw ShapeMismatch("edge rates: per-agent input has wrong length");
  }
  const Tensor vacc =
      Tensor::Constant(std::vector<double>(vaccinated.begin(), vaccinated.end()));

  Tensor c = infectiousness * (1.0 - p.psi2 * vacc);
  if (!AllOnes(control.infector)) c = c * Tensor::Constant(control.infector);
  const Tensor c_edge = Gather(c, g.by_agent());
  const Tensor venue_load = SegmentSum(c_edge, g.by_venue());
  Tensor pe = (Gather(venue_load, g.by_venue()) - c_edge) *
              Gather(p.rho / p.q, g.by_kind());
  if (!AllOnes(control.venue_open)) {
    std::vector<double> open(g.edge_count());
    for (std::size_t e = 0; e < open.size(); ++e) {
      open[e] = control.venue_open[g.edge_venue()[e]];
    }
    pe = pe * Tensor::Constant(std::move(open));
  }

  const Tensor vacc_factor = Pick(p.attr_vaccination, 0) * (1.0 - vacc) +
                             Pick(p.attr_vaccination, 1) * vacc;
  Tensor sus = attr * vacc_factor * (1.0 - p.psi1 * vacc);
  if (!AllOnes(control.susceptible)) {
    sus = sus * Tensor::Constant(control.susceptible);
  }
  return pe * Gather(sus, g.by_agent()) * (p.R * r_multiplier);
}

}  // namespace

void DiseaseParams::Validate() const {
  Require(beta >= 0.0 && beta <= 1.0, "beta must be in [0, 1]");
  Require(phi >= 0.0 && phi < 1.0, "phi must be in [0, 1)");
  Require(std::isfinite(theta_ei) && theta_ei > 0.0, "theta_ei must be > 0");
  Require(std::isfinite(theta_ir) && theta_ir > theta_ei,
          "theta_ir must exceed theta_ei");
  Require(std::isfinite(gamma_shape) && gamma_shape > 1.0,
          "gamma_shape must be > 1");
  Require(std::isfinite(gamma_scale) && gamma_scale > 0.0,
          "gamma_scale must be > 0");
  Require(std::isfinite(R) && R > 0.0, "R must be > 0");
  RequirePositive(venue.rho, "rho");
  RequirePositive(venue.q, "q");
  Require(psi1 >= 0.0 && psi1 <= 1.0, "psi1 must be in [0, 1]");
  Require(psi2 >= 0.0 && psi2 <= 1.0, "psi2 must be in [0, 1]");
  RequirePositive(attr.age, "age factor");
  RequirePositive(attr.sex, "sex factor");
  RequirePositive(attr.ethnicity, "ethnicity factor");
  RequirePositive(attr.vaccination, "vaccination factor");
  Require(attr.age[AttributeFactors::kAgeReference] == 1.0 &&
              attr.sex[AttributeFactors::kSexReference] == 1.0 &&
              attr.ethnicity[AttributeFactors::kEthnicityReference] == 1.0 &&
              attr.vaccination[AttributeFactors::kVaccinationReference] == 1.0,
          "reference attribute factors must be 1");
}

ParamTensors ParamTensors::Constant(const DiseaseParams& p) {
  ParamTensors t;
  t.beta = Tensor::Scalar(p.beta);
  t.phi = Tensor::Scalar(p.phi);
  t.theta_ei = Tensor::Scalar(p.theta_ei);
  t.theta_ir = Tensor::Scalar(p.theta_ir);
  t.gamma_shape = Tensor::Scalar(p.gamma_shape);
  t.gamma_scale = Tensor::Scalar(p.gamma_scale);
  t.R = Tensor::Scalar(p.R);
  t.rho = ArrayTensor(p.venue.rho);
  t.q = ArrayTensor(p.venue.q);
  t.psi1 = Tensor::Scalar(p.psi1);
  t.psi2 = Tensor::Scalar(p.psi2);
  t.attr_age = ArrayTensor(p.attr.age);
  t.attr_sex = ArrayTensor(p.attr.sex);
  t.attr_ethnicity = ArrayTensor(p.attr.ethnicity);
  t.attr_vaccination = ArrayTensor(p.attr.vaccination);
  return t;
}

DiseaseParams ParamTensors::Values() const {
  DiseaseParams p;
  p.beta = beta.item();
  p.phi = phi.item();
  p.theta_ei = theta_ei.item();
  p.theta_ir = theta_ir.item();
  p.gamma_shape = gamma_shape.item();
  p.gamma_scale = gamma_scale.item();
  p.R = R.item();
  p.venue.rho = ToArray<kNumVenueKinds>(rho);
  p.venue.q = ToArray<kNumVenueKinds>(q);
  p.psi1 = psi1.item();
  p.psi2 = psi2.item();
  p.attr.age = ToArray<kNumAgeBands>(attr_age);
  p.attr.sex = ToArray<kNumSexes>(attr_sex);
  p.attr.ethnicity = ToArray<kNumEthnicities>(attr_ethnicity);
  p.attr.vaccination = ToArray<2>(attr_vaccination);
  return p;
}

ModulatorWeights ModulatorWeights::Zero(int hidden, double phi_max) {
  if (hidden < 1) throw DomainError("hidden size must be >= 1");
  ModulatorWeights m;
  m.hidden = hidden;
  m.phi_max = phi_max;
  for (int k = 0; k < 4; ++k) {
    m.w[k].assign(static_cast<std::size_t>(hidden) * (hidden + 1), 0.0);
    m.b[k].assign(hidden, 0.0);
  }
  m.head_r.assign(hidden, 0.0);
  m.head_phi.assign(hidden, 0.0);
  return m;
}

ModulatorTensors ModulatorTensors::Constant(const ModulatorWeights& m) {
  const auto h = static_cast<std::size_t>(m.hidden);
  ModulatorTensors t;
  t.hidden = m.hidden;
  t.phi_max = m.phi_max;
  for (int k = 0; k < 4; ++k) {
    t.w[k] = Tensor::Constant(m.w[k], {h, h + 1});
    t.b[k] = Tensor::Constant(m.b[k], {h});
  }
  t.head_r = Tensor::Constant(m.head_r, {1, h});
  t.head_phi = Tensor::Constant(m.head_phi, {1, h});
  t.bias_r = Tensor::Constant({m.bias_r}, {1});
  t.bias_phi = Tensor::Constant({m.bias_phi}, {1});
  return t;
}

ModulatorWeights ModulatorTensors::Values() const {
  ModulatorWeights m;
  m.hidden = hidden;
  m.phi_max = phi_max;
  for (int k = 0; k < 4; ++k) {
    m.w[k] = ToVector(w[k]);
    m.b[k] = ToVector(b[k]);
  }
  m.head_r = ToVector(head_r);
  m.head_phi = ToVector(head_phi);
  m.bias_r = bias_r.item();
  m.bias_phi = bias_phi.item();
  return m;
}

namespace {

// Differentiable slice [offset, offset + len) of a flat vector, reshaped.
Tensor Slice(const Tensor& flat, std::size_t& offset, ad::Shape shape) {
  const std::size_t len = ad::NumElements(shape);
  if (offset + len > flat.numel()) {
    throw ShapeMismatch("flat parameter vector is too short");
  }
  std::vector<std::int32_t> ids(len);
  std::iota(ids.begin(), ids.end(), static_cast<std::int32_t>(offset));
  offset += len;
  return ad::Reshape(
      Gather(flat, std::make_shared<kernels::SegmentIndex>(std::move(ids),
                                                           flat.numel())),
      std::move(shape));
}

template <std::size_t N>
void Append(std::vector<double>& out, const std::array<double, N>& a) {
  out.insert(out.end(), a.begin(), a.end());
}

template <std::size_t N>
void Take(std::span<const double> flat, std::size_t& offset,
          std::array<double, N>& a) {
  std::copy_n(flat.begin() + offset, N, a.begin());
  offset += N;
}

constexpr std::size_t kParamCount = 7 + 2 * kNumVenueKinds + 2 + kNumAgeBands +
                                    kNumSexes + kNumEthnicities + 2;

}  // namespace

const std::vector<std::string>& ParamNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"beta",        "phi",         "theta_ei",
                               "theta_ir",    "gamma_shape", "gamma_scale",
                               "R"};
    for (const char* what : {"rho", "q"}) {
      for (int k = 0; k < kNumVenueKinds; ++k) {
        n.push_back(std::string(what) + "." +
                    std::string(VenueKindName(static_cast<VenueKind>(k))));
      }
    }
    n.push_back("psi1");
    n.push_back("psi2");
    for (int b = 0; b < kNumAgeBands; ++b) {
      n.push_back("attr.age." + std::string(AgeBandName(b)));
    }
    for (int s = 0; s < kNumSexes; ++s) {
      n.push_back("attr.sex." + std::string(SexName(static_cast<Sex>(s))));
    }
    for (int e = 0; e < kNumEthnicities; ++e) {
      n.push_back("attr.ethnicity." +
                  std::string(EthnicityName(static_cast<Ethnicity>(e))));
    }
    n.push_back("attr.vaccination.unvaccinated");
    n.push_back("attr.vaccination.vaccinated");
    return n;
  }();
  return names;
}

std::vector<double> Flatten(const DiseaseParams& p) {
  std::vector<double> out{p.beta,        p.phi,         p.theta_ei,
                          p.theta_ir,    p.gamma_shape, p.gamma_scale,
                          p.R};
  Append(out, p.venue.rho);
  Append(out, p.venue.q);
  out.push_back(p.psi1);
  out.push_back(p.psi2);
  Append(out, p.attr.age);
  Append(out, p.attr.sex);
  Append(out, p.attr.ethnicity);
  Append(out, p.attr.vaccination);
  return out;
}

DiseaseParams UnflattenParams(std::span<const double> flat) {
  if (flat.size() != kParamCount) {
    throw ShapeMismatch("expected " + std::to_string(kParamCount) +
                        " disease parameters");
  }
  DiseaseParams p;
  p.beta = flat[0];
  p.phi = flat[1];
  p.theta_ei = flat[2];
  p.theta_ir = flat[3];
  p.gamma_shape = flat[4];
  p.gamma_scale = flat[5];
  p.R = flat[6];
  std::size_t at = 7;
  Take(flat, at, p.venue.rho);
  Take(flat, at, p.venue.q);
  p.psi1 = flat[at++];
  p.psi2 = flat[at++];
  Take(flat, at, p.attr.age);
  Take(flat, at, p.attr.sex);
  Take(flat, at, p.attr.ethnicity);
  Take(flat, at, p.attr.vaccination);
  return p;
}

ParamTensors ParamTensorsFromFlat(const Tensor& flat) {
  if (flat.numel() != kParamCount) {
    throw ShapeMismatch("expected " + std::to_string(kParamCount) +
                        " disease parameters");
  }
  std::size_t at = 0;
  ParamTensors t;
  t.beta = Slice(flat, at, {});
  t.phi = Slice(flat, at, {});
  t.theta_ei = Slice(flat, at, {});
  t.theta_ir = Slice(flat, at, {});
  t.gamma_shape = Slice(flat, at, {});
  t.gamma_scale = Slice(flat, at, {});
  t.R = Slice(flat, at, {});
  t.rho = Slice(flat, at, {kNumVenueKinds});
  t.q = Slice(flat, at, {kNumVenueKinds});
  t.psi1 = Slice(flat, at, {});
  t.psi2 = Slice(flat, at, {});
  t.attr_age = Slice(flat, at, {kNumAgeBands});
  t.attr_sex = Slice(flat, at, {kNumSexes});
  t.attr_ethnicity = Slice(flat, at, {kNumEthnicities});
  t.attr_vaccination = Slice(flat, at, {2});
  return t;
}

std::size_t ModulatorSize(int hidden) {
  const auto h = static_cast<std::size_t>(hidden);
  return 4 * h * (h + 1) + 4 * h + 2 * h + 2;
}

std::vector<double> Flatten(const ModulatorWeights& m) {
  std::vector<double> out;
  out.reserve(ModulatorSize(m.hidden));
  for (const auto& w : m.w) out.insert(out.end(), w.begin(), w.end());
  for (const auto& b : m.b) out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), m.head_r.begin(), m.head_r.end());
  out.insert(out.end(), m.head_phi.begin(), m.head_phi.end());
  out.push_back(m.bias_r);
  out.push_back(m.bias_phi);
  if (out.size() != ModulatorSize(m.hidden)) {
    throw ShapeMismatch("modulator weights have inconsistent sizes");
  }
  return out;
}

ModulatorWeights UnflattenModulator(std::span<const double> flat, int hidden,
                                    double phi_max) {
  if (flat.size() != ModulatorSize(hidden)) {
    throw ShapeMismatch("modulator vector has the wrong length");
  }
  ModulatorWeights m = ModulatorWeights::Zero(hidden, phi_max);
  std::size_t at = 0;
  auto take = [&](std::vector<double>& v) {
    std::copy_n(flat.begin() + at, v.size(), v.begin());
    at += v.size();
  };
  for (auto& w : m.w) take(w);
  for (auto& b : m.b) take(b);
  take(m.head_r);
  take(m.head_phi);
  m.bias_r = flat[at++];
  m.bias_phi = flat[at++];
  return m;
}

ModulatorTensors ModulatorTensorsFromFlat(const Tensor& flat, int hidden,
                                          double phi_max) {
  if (flat.numel() != ModulatorSize(hidden)) {
    throw ShapeMismatch("modulator vector has the wrong length");
  }
  const auto h = static_cast<std::size_t>(hidden);
  ModulatorTensors t;
  t.hidden = hidden;
  t.phi_max = phi_max;
  std::size_t at = 0;
  for (auto& w : t.w) w = Slice(flat, at, {h, h + 1});
  for (auto& b : t.b) b = Slice(flat, at, {h});
  t.head_r = Slice(flat, at, {1, h});
  t.head_phi = Slice(flat, at, {1, h});
  t.bias_r = Slice(flat, at, {1});
  t.bias_phi = Slice(flat, at, {1});
  return t;
}

LstmOutput LstmStep(const ModulatorTensors& m, const Tensor& h,
                    const Tensor& c, const Tensor& x) {
  const auto hidden = static_cast<std::size_t>(m.hidden);
  if (h.numel() != hidden || c.numel() != hidden || x.numel() != 1) {
    throw ShapeMismatch("lstm: state or input has the wrong size");
  }
  const Tensor xh = Concat(std::vector<Tensor>{x, h});
  auto gate = [&](int k) { return MatVec(m.w[k], xh) + m.b[k]; };
  const Tensor i = Sigmoid(gate(0));
  const Tensor f = Sigmoid(gate(1));
  const Tensor o = Sigmoid(gate(2));
  const Tensor g = Tanh(gate(3));
  LstmOutput out;
  out.c = f * c + i * g;
  out.h = o * Tanh(out.c);
  out.r_multiplier = 2.0 * Sigmoid(MatVec(m.head_r, out.h) + m.bias_r);
  out.phi = m.phi_max * Sigmoid(MatVec(m.head_phi, out.h) + m.bias_phi);
  return out;
}

Tensor GammaProfile(const Tensor& t, const Tensor& shape, const Tensor& scale) {
  for (double v : t.values()) Require(v > 0.0, "profile: t must be > 0");
  Require(shape.item() > 1.0, "profile: shape must be > 1");
  Require(scale.item() > 0.0, "profile: scale must be > 0");
  // log g(t) - log g(mode); the normalizing constants cancel.
  const Tensor v1 = shape - 1.0;
  const Tensor mode = v1 * scale;
  return Exp(v1 * (Log(t) - Log(mode)) - (t - mode) / scale);
}

Tensor InfectiousnessProfile(const Tensor& t, const Tensor& shape,
                             const Tensor& scale, const Tensor& theta_ei,
                             const Tensor& theta_ir, double sharpness) {
  Require(sharpness > 0.0, "profile: gate sharpness must be > 0");
  Require(theta_ir.item() > theta_ei.item(),
          "profile: theta_ir must exceed theta_ei");
  return GammaProfile(t, shape, scale) * Sigmoid(sharpness * (t - theta_ei)) *
         Sigmoid(sharpness * (theta_ir - t));
}

Tensor SeedInitialInfections(const Tensor& beta, std::size_t n_agents,
                             std::span<const std::int32_t> restriction,
                             double temperature, Rng& rng, bool hard) {
  const double b = beta.item();
  Require(b >= 0.0 && b <= 1.0, "seed: beta must be in [0, 1]");
  Tensor p = ad::Broadcast(beta, {n_agents});
  if (!restriction.empty()) {
    std::vector<double> mask(n_agents, 0.0);
    for (std::int32_t a : restriction) {
      Require(a >= 0 && static_cast<std::size_t>(a) < n_agents,
              "seed: restriction id out of range");
      mask[a] = 1.0;
    }
    p = p * Tensor::Constant(std::move(mask));
  }
  return ad::GumbelSoftmaxBernoulli(p, temperature, rng, hard);
}

Tensor SeedFixedCount(std::size_t n_agents,
                      std::span<const std::int32_t> restriction,
                      std::int64_t count, Rng& rng) {
  std::vector<std::int32_t> pool;
  if (restriction.empty()) {
    pool.resize(n_agents);
    std::iota(pool.begin(), pool.end(), 0);
  } else {
    pool.assign(restriction.begin(), restriction.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  }
  Require(count >= 0 && static_cast<std::size_t>(count) <= pool.size(),
          "seed count exceeds the eligible agents");
  std::vector<double> out(n_agents, 0.0);
  for (std::int64_t k = 0; k < count; ++k) {
    const std::size_t pick = k + rng.Index(pool.size() - k);
    std::swap(pool[k], pool[pick]);
    Require(pool[k] >= 0 && static_cast<std::size_t>(pool[k]) < n_agents,
            "seed: restriction id out of range");
    out[pool[k]] = 1.0;
  }
  return Tensor::Constant(std::move(out));
}

Tensor RandomInfections(const Tensor& phi, const Tensor& susceptible_mask,
                        double temperature, Rng& rng, bool hard) {
  const double f = phi.item();
  Require(f >= 0.0 && f < 1.0, "random infections: phi must be in [0, 1)");
  const Tensor z = ad::GumbelSoftmaxBernoulli(
      ad::Broadcast(phi, {susceptible_mask.numel()}), temperature, rng, hard);
  return susceptible_mask * z;
}

Tensor AggregateExposure(const Tensor& edge_rates,
                         const ad::SegmentIndexPtr& by_agent) {
  for (double r : edge_rates.values()) {
    Require(r >= 0.0, "exposure: negative rate");
  }
  return 1.0 - Exp(-SegmentSum(edge_rates, by_agent));
}

ModelContext::ModelContext(const Population& pop, const ContactGraph& graph)
    : pop_(&pop), graph_(&graph) {
  if (graph.agent_count() != pop.size() ||
      graph.venue_count() != pop.venues.size()) {
    throw ShapeMismatch("contact graph does not match the population");
  }
  age_ = AttributeIndex(pop, kNumAgeBands,
                        [](const Agent& a) { return AgeBand(a.age); });
  sex_ = AttributeIndex(pop, kNumSexes,
                        [](const Agent& a) { return static_cast<int>(a.sex); });
  ethnicity_ = AttributeIndex(pop, kNumEthnicities, [](const Agent& a) {
    return static_cast<int>(a.ethnicity);
  });
  vacc0_.reserve(pop.size());
  for (const Agent& a : pop.agents) vacc0_.push_back(a.vaccinated ? 1.0 : 0.0);
}

Tensor EdgeTransmissionRates(const ModelContext& ctx, const ParamTensors& p,
                             const Tensor& infectiousness,
                             std::span<const double> vaccinated,
                             const ControlModifier& control,
                             const Tensor& r_multiplier) {
  return EdgeRates(ctx, p, AttributeFactor(ctx, p), infectiousness, vaccinated,
                   control, r_multiplier);
}

Simulation::Simulation(const ModelContext& ctx, const ParamTensors& params,
                       const ModulatorTensors* modulator,
                       const PolicySet& policies, const SimOptions& options)
    : ctx_(ctx),
      p_(params),
      mod_(modulator),
      policies_(policies),
      opt_(options),
      hard_(options.mode == Mode::kHard),
      seed_rng_(DeriveSeed(options.seeding_seed.value_or(options.seed), 1)),
      contact_rng_(DeriveSeed(options.seed, 2)),
      random_rng_(DeriveSeed(options.seed, 3)),
      streams_(options.seed),
      policy_(ctx.agents(), ctx.graph().venue_count()),
      vacc_(ctx.initial_vaccination()),
      infection_day_(ctx.agents(), -1) {
  p_.Values().Validate();
  policies_.Validate();
  Require(opt_.horizon_days >= 1, "horizon must be >= 1 day");
  Require(opt_.temperature > 0.0, "temperature must be > 0");
  theta_ei_ = p_.theta_ei.item();
  theta_ir_ = p_.theta_ir.item();

  const auto horizon = static_cast<std::size_t>(opt_.horizon_days);
  std::vector<double> lags(horizon);
  std::iota(lags.begin(), lags.end(), 1.0);
  profile_ = Concat(std::vector<Tensor>{
      Tensor::Constant({0.0}),
      InfectiousnessProfile(Tensor::Constant(std::move(lags)), p_.gamma_shape,
                            p_.gamma_scale, p_.theta_ei, p_.theta_ir,
                            opt_.gate_sharpness)});
  attr_static_ = AttributeFactor(ctx_, p_);
  if (mod_) {
    const auto h = static_cast<std::size_t>(mod_->hidden);
    h_ = Tensor::Full({h}, 0.0);
    c_ = Tensor::Full({h}, 0.0);
  }
}

void Simulation::UpdateModulator() {
  if (!mod_) {
    r_mult_ = Tensor::Scalar(1.0);
    phi_ = p_.phi;
    return;
  }
  if (day_ % kWeek != 0) return;
  Tensor x = Tensor::Constant({0.0});
  if (day_ > 0) {
    const auto first = daily_.end() - kWeek;
    const Tensor week = Sum(Concat(std::vector<Tensor>(first, daily_.end())));
    const double norm = std::log1p(static_cast<double>(ctx_.agents()));
    x = ad::Reshape(Log(week + 1.0) / norm, {1});
  }
  LstmOutput out = LstmStep(*mod_, h_, c_, x);
  h_ = out.h;
  c_ = out.c;
  r_mult_ = out.r_multiplier;
  phi_ = out.phi;
}

void Simulation::Seed() {
  if (day_ != -1) throw InconsistentState("simulation already seeded");
  day_ = 0;
  UpdateModulator();
  const Tensor n0 =
      opt_.seed_count
          ? SeedFixedCount(ctx_.agents(), opt_.seed_restriction,
                           *opt_.seed_count, seed_rng_)
          : SeedInitialInfections(p_.beta, ctx_.agents(), opt_.seed_restriction,
                                  opt_.temperature, seed_rng_, hard_);
  cumulative_ = n0;
  Record(n0);
}

ControlModifier Simulation::Controls() {
  const std::size_t n = ctx_.agents();
  const std::size_t v = ctx_.graph().venue_count();
  if (!policies_.any()) return ControlModifier::Identity(n, v);
  const Mode mode = opt_.mode;
  const std::vector<std::int32_t> found =
      DetectCases(policy_, infection_day_, theta_ei_, theta_ir_, policies_.icc,
                  day_, streams_.detect, mode);
  const Population& pop = ctx_.population();
  std::vector<ControlModifier> parts;
  if (policies_.icc.enabled) {
    ApplyIcc(policy_, found, policies_.icc, day_, streams_.icc, mode);
    parts.push_back(IsolationModifier(policy_, day_));
  }
  if (policies_.qec.enabled) {
    ApplyQec(policy_, pop, found, vacc_, policies_.qec, day_, streams_.qec,
             mode);
    parts.push_back(QuarantineModifier(policy_, day_));
  }
  if (policies_.sc.enabled) {
    ApplySchoolClosure(policy_, pop, found, policies_.sc, day_);
    parts.push_back(ClosureModifier(policy_, day_));
  }
  if (parts.empty()) return ControlModifier::Identity(n, v);
  return ComposeControlModifier(parts);
}

void Simulation::Step() {
  if (day_ < 0) throw InconsistentState("step before seeding");
  ++day_;
  if (day_ >= opt_.horizon_days) {
    throw InconsistentState("step beyond the configured horizon");
  }
  UpdateModulator();
  const ControlModifier control = Controls();
  const Tensor infectiousness = ad::LaggedSum(history_, profile_);
  const Tensor rates = EdgeRates(ctx_, p_, attr_static_, infectiousness, vacc_,
                                 control, r_mult_);
  const Tensor prob = AggregateExposure(rates, ctx_.graph().by_agent());
  const Tensor z_contact =
      ad::GumbelSoftmaxBernoulli(prob, opt_.temperature, contact_rng_, hard_);
  const Tensor susceptible = 1.0 - cumulative_;
  const Tensor z_random = RandomInfections(phi_, susceptible, opt_.temperature,
                                           random_rng_, hard_);
  const Tensor n = susceptible * z_contact + z_random * (1.0 - z_contact);
  cumulative_ = cumulative_ + n;
  Record(n);
  if (policies_.vc.enabled) {
    ApplyVaccinationCampaign(vacc_, policy_, ctx_.population(), infection_day_,
                             theta_ir_, policies_.vc, day_, streams_.vc,
                             opt_.mode);
  }
}

void Simulation::Record(const Tensor& n) {
  history_.push_back(n);
  daily_.push_back(Sum(n));
  const auto cum = cumulative_.values();
  for (std::size_t a = 0; a < cum.size(); ++a) {
    const double x = cum[a];
    const bool ok = hard_ ? (x == 0.0 || x == 1.0)
                          : (x >= -1e-9 && x <= 1.0 + 1e-9);
    if (!ok) {
      throw InconsistentState("agent " + std::to_string(a) +
                              " has cumulative infection " + std::to_string(x));
    }
    if (infection_day_[a] < 0 && x >= 0.5) infection_day_[a] = day_;
  }

  trace_.new_infections.push_back(daily_.back().item());
  double cumulative = 0.0, exposed = 0.0, infectious = 0.0, recovered = 0.0;
  for (int s = 0; s <= day_; ++s) {
    const double count = trace_.new_infections[s];
    const int d = day_ - s;
    cumulative += count;
    if (d < theta_ei_) {
      exposed += count;
    } else if (d < theta_ir_) {
      infectious += count;
    } else {
      recovered += count;
    }
  }
  trace_.S.push_back(static_cast<double>(ctx_.agents()) - cumulative);
  trace_.E.push_back(exposed);
  trace_.I.push_back(infectious);
  trace_.R.push_back(recovered);
  trace_.r_multiplier.push_back(r_mult_.item());
  trace_.phi.push_back(phi_.item());
}

SimResult Simulation::Finish() && {
  if (day_ < 0) throw InconsistentState("finish before seeding");
  SimResult out;
  trace_.infection_day = infection_day_;
  out.trace = std::move(trace_);
  out.daily_incidence = Concat(daily_);
  out.policy_state = std::move(policy_);
  out.final_vaccination = std::move(vacc_);
  return out;
}

SimResult Simulate(const ModelContext& ctx, const ParamTensors& params,
                   const ModulatorTensors* modulator,
                   const PolicySet& policies, const SimOptions& options) {
  Simulation sim(ctx, params, modulator, policies, options);
  sim.Seed();
  while (sim.day() + 1 < options.horizon_days) sim.Step();
  return std::move(sim).Finish();
}

std::string TraceCsv(const EpidemicTrace& trace) {
  std::ostringstream out;
  out << "day,new_infections,S,E,I,R,R_t_multiplier,phi_t\n";
  for (int t = 0; t < trace.days(); ++t) {
    out << t << ',' << io::FormatReal(trace.new_infections[t]) << ','
        << io::FormatReal(trace.S[t]) << ',' << io::FormatReal(trace.E[t])
        << ',' << io::FormatReal(trace.I[t]) << ','
        << io::FormatReal(trace.R[t]) << ','
        << io::FormatReal(trace.r_multiplier[t]) << ','
        << io::FormatReal(trace.phi[t]) << '\n';
  }
  return out.str();
}

}  // namespace diffabm
