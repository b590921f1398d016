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


#include "diffabm/calibration.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"

namespace diffabm {
namespace {

using Json = nlohmann::ordered_json;

enum Slot : std::size_t {
  kBeta = 0,
  kPhi = 1,
  kThetaEi = 2,
  kThetaIr = 3,
  kShape = 4,
  kPsi1 = 19,
  kPsi2 = 20,
  kAttr = 21,
};

bool IsSigmoidSlot(std::size_t i) {
  return i == kBeta || i == kPhi || i == kPsi1 || i == kPsi2;
}

bool IsReferenceSlot(std::size_t i) {
  const std::size_t sex = kAttr + kNumAgeBands;
  const std::size_t eth = sex + kNumSexes;
  const std::size_t vac = eth + kNumEthnicities;
  return i == kAttr + AttributeFactors::kAgeReference ||
         i == sex + AttributeFactors::kSexReference ||
         i == eth + AttributeFactors::kEthnicityReference ||
         i == vac + AttributeFactors::kVaccinationReference;
}

double Logit(double p) {
  p = std::clamp(p, 1e-300, 1.0 - 1e-16);
  return std::log(p) - std::log1p(-p);
}

double SigmoidOf(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

double SoftplusOf(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Inverse of softplus for y > 0.
double InverseSoftplus(double y) {
  if (!(y > 0)) throw DomainError("inverse softplus needs a positive value");
  return y > 30 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

ad::SegmentIndexPtr Index(std::vector<std::int32_t> ids, std::size_t n) {
  return std::make_shared<kernels::SegmentIndex>(std::move(ids), n);
}

}  // namespace

void ObservationSeries::Validate() const {
  if (cases.empty()) throw DataError("observation series is empty");
  if (week_index.size() != cases.size()) {
    throw LengthMismatch("observation weeks and counts differ in length");
  }
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!(cases[i] >= 0) || !std::isfinite(cases[i])) {
      throw DataError("negative case count in week " +
                      std::to_string(week_index[i]));
    }
    if (i > 0 && week_index[i] != week_index[i - 1] + 1) {
      throw DataError("weeks are not consecutive after week " +
                      std::to_string(week_index[i - 1]));
    }
  }
}

ObservationSeries LoadObservations(const std::string& path) {
  const io::CsvFile csv(path, "week_index,cases");
  ObservationSeries obs;
  for (const io::CsvRow& row : csv.rows()) {
    const std::int64_t cases = csv.Int(row, 1);
    if (cases < 0) csv.Fail(row, "cases must be non-negative");
    if (!obs.week_index.empty() &&
        csv.Int(row, 0) != obs.week_index.back() + 1) {
      csv.Fail(row, "weeks must be consecutive");
    }
    obs.week_index.push_back(static_cast<int>(csv.Int(row, 0)));
    obs.cases.push_back(static_cast<double>(cases));
  }
  if (obs.cases.empty()) throw ParseError(csv.name(), 1, "no observations");
  return obs;
}

std::string ObservationsCsv(const ObservationSeries& obs) {
  std::ostringstream out;
  out << "week_index,cases\n";
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out << obs.week_index[i] << ',' << io::FormatReal(obs.cases[i]) << '\n';
  }
  return out.str();
}

ParamTransform::ParamTransform(const DiseaseParams& base,
                               std::vector<std::string> fixed)
    : base_(Flatten(base)), learn_(base_.size(), 1.0) {
  try {
    base.Validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("initial parameters: ") + e.what());
  }
  const std::vector<std::string>& names = ParamNames();
  for (const std::string& f : fixed) {
    const auto it = std::find(names.begin(), names.end(), f);
    if (it == names.end()) throw ConfigError("unknown parameter '" + f + "'");
    learn_[it - names.begin()] = 0.0;
  }
  for (std::size_t i = 0; i < learn_.size(); ++i) {
    if (IsReferenceSlot(i)) learn_[i] = 0.0;
  }
  if (learn_[kThetaEi] > 0 && learn_[kThetaIr] == 0) {
    throw ConfigError("theta_ir cannot be fixed while theta_ei is learned");
  }
}

std::vector<double> ParamTransform::ToUnconstrained(
    const DiseaseParams& p) const {
  const std::vector<double> c = Flatten(p);
  std::vector<double> u(c.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (learn_[i] == 0) continue;
    if (IsSigmoidSlot(i)) {
      u[i] = Logit(c[i]);
    } else if (i == kShape) {
      u[i] = InverseSoftplus(c[i] - 1.0);
    } else if (i == kThetaIr) {
      u[i] = InverseSoftplus(c[kThetaIr] - c[kThetaEi]);
    } else {
      u[i] = InverseSoftplus(c[i]);
    }
  }
  return u;
}

DiseaseParams ParamTransform::FromUnconstrained(
    std::span<const double> u) const {
  if (u.size() != base_.size()) {
    throw ShapeMismatch("unconstrained vector has the wrong length");
  }
  std::vector<double> c = base_;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (learn_[i] == 0) continue;
    if (IsSigmoidSlot(i)) {
      c[i] = SigmoidOf(u[i]);
    } else if (i == kShape) {
      c[i] = 1.0 + SoftplusOf(u[i]);
    } else {
      c[i] = SoftplusOf(u[i]);
    }
  }
  if (learn_[kThetaIr] > 0) c[kThetaIr] += c[kThetaEi];
  return UnflattenParams(c);
}

Tensor ParamTransform::Constrain(const Tensor& u) const {
  const std::size_t n = base_.size();
  if (u.numel() != n) {
    throw ShapeMismatch("unconstrained vector has the wrong length");
  }
  std::vector<double> sig(n, 0.0), sp(n, 0.0), fixed(n, 0.0), ir(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (learn_[i] == 0) {
      fixed[i] = base_[i];
    } else if (IsSigmoidSlot(i)) {
      sig[i] = 1.0;
    } else {
      sp[i] = 1.0;
      if (i == kShape) fixed[i] = 1.0;
    }
  }
  Tensor c = ad::Sigmoid(u) * Tensor::Constant(sig) +
             ad::Softplus(u) * Tensor::Constant(sp) + Tensor::Constant(fixed);
  if (learn_[kThetaIr] > 0) {
    ir[kThetaIr] = 1.0;
    const Tensor ei = ad::Gather(
        c, Index(std::vector<std::int32_t>(n, kThetaEi), n));
    c = c + ei * Tensor::Constant(ir);
  }
  return c;
}

std::vector<double> XavierUniform(int fan_in, int fan_out, std::size_t count,
                                  Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw DomainError("Xavier fans must be positive");
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(count);
  for (double& x : w) x = rng.Uniform(-bound, bound);
  return w;
}

ModulatorWeights InitModulator(int hidden, double phi_max, double phi0,
                               Rng& rng) {
  if (!(phi0 >= 0 && phi0 < phi_max)) {
    throw ConfigError("initial phi must lie in [0, phi_max)");
  }
  ModulatorWeights m = ModulatorWeights::Zero(hidden, phi_max);
  for (auto& w : m.w) {
    w = XavierUniform(1 + hidden, hidden,
                      static_cast<std::size_t>(hidden) * (1 + hidden), rng);
  }
  m.head_r = XavierUniform(hidden, 1, hidden, rng);
  m.head_phi = XavierUniform(hidden, 1, hidden, rng);
  m.bias_r = 0.0;
  m.bias_phi = Logit(std::max(phi0 / phi_max, 1e-6));
  return m;
}

Tensor WeeklyAggregate(const Tensor& daily, int week_length) {
  if (week_length <= 0) throw DomainError("week length must be positive");
  const std::size_t days = daily.numel();
  if (days == 0) throw EmptySeries("no days to aggregate");
  const std::size_t weeks = (days + week_length - 1) / week_length;
  std::vector<std::int32_t> ids(days);
  for (std::size_t d = 0; d < days; ++d) {
    ids[d] = static_cast<std::int32_t>(d / week_length);
  }
  return ad::SegmentSum(daily, Index(std::move(ids), weeks));
}

std::vector<double> WeeklyAggregate(std::span<const double> daily,
                                    int week_length) {
  const Tensor t = WeeklyAggregate(
      Tensor::Constant(std::vector<double>(daily.begin(), daily.end())),
      week_length);
  return {t.values().begin(), t.values().end()};
}

Tensor WeeklyLoss(const Tensor& sim_weekly, std::span<const double> observed,
                  bool normalize) {
  if (sim_weekly.numel() != observed.size()) {
    throw LengthMismatch("simulated " + std::to_string(sim_weekly.numel()) +
                         " weeks against " + std::to_string(observed.size()) +
                         " observed");
  }
  if (observed.empty()) throw EmptySeries("no weeks to compare");
  double scale = static_cast<double>(observed.size());
  if (normalize) {
    const double peak = *std::max_element(observed.begin(), observed.end());
    if (peak > 0) scale *= peak * peak;
  }
  const Tensor diff =
      sim_weekly -
      Tensor::Constant(std::vector<double>(observed.begin(), observed.end()));
  return ad::Sum(diff * diff) * (1.0 / scale);
}

void CalibrationConfig::Validate() const {
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(max_grad_norm >= 0)) throw ConfigError("max_grad_norm must be >= 0");
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  if (!(gate_sharpness > 0)) {
    throw ConfigError("gate_sharpness must be positive");
  }
  if (hidden < 1) throw ConfigError("hidden must be at least 1");
  if (!(phi_max > 0 && phi_max < 1)) {
    throw ConfigError("phi_max must lie in (0, 1)");
  }
  if (week_range && week_range->first > week_range->second) {
    throw ConfigError("week_range must be [first, last]");
  }
}

namespace {

std::vector<std::string> WithPhiFixed(std::vector<std::string> fixed,
                                      bool modulated) {
  if (modulated &&
      std::find(fixed.begin(), fixed.end(), "phi") == fixed.end()) {
    fixed.push_back("phi");
  }
  return fixed;
}

}  // namespace

CalibrationProblem::CalibrationProblem(const ModelContext& ctx,
                                       const ObservationSeries& observed,
                                       const PolicySet& policies,
                                       const DiseaseParams& init,
                                       const CalibrationConfig& config)
    : ctx_(ctx),
      observed_(observed),
      policies_(policies),
      config_(config),
      transform_(init, WithPhiFixed(config.fixed, config.use_modulator)),
      n_disease_(ParamNames().size()) {
  config_.Validate();
  observed_.Validate();
  policies_.Validate();
  if (config_.week_range &&
      (observed_.week_index.front() != config_.week_range->first ||
       observed_.week_index.back() != config_.week_range->second)) {
    throw WeekRangeMismatch(
        "observations cover weeks " +
        std::to_string(observed_.week_index.front()) + "-" +
        std::to_string(observed_.week_index.back()) + ", expected " +
        std::to_string(config_.week_range->first) + "-" +
        std::to_string(config_.week_range->second));
  }
  u0_ = transform_.ToUnconstrained(init);
  if (config_.use_modulator) {
    Rng rng(DeriveSeed(config_.seed, 0x1417));
    const double phi0 = init.phi > 0 ? init.phi : 1e-3 * config_.phi_max;
    const std::vector<double> m = Flatten(
        InitModulator(config_.hidden, config_.phi_max, phi0, rng));
    u0_.insert(u0_.end(), m.begin(), m.end());
  }
}

std::size_t CalibrationProblem::size() const { return u0_.size(); }

DiseaseParams CalibrationProblem::Params(std::span<const double> u) const {
  return transform_.FromUnconstrained(u.first(n_disease_));
}

std::optional<ModulatorWeights> CalibrationProblem::Modulator(
    std::span<const double> u) const {
  if (!config_.use_modulator) return std::nullopt;
  return UnflattenModulator(u.subspan(n_disease_), config_.hidden,
                            config_.phi_max);
}

Objective CalibrationProblem::Evaluate(std::span<const double> u,
                                       int iteration) const {
  if (u.size() != size()) {
    throw ShapeMismatch("parameter vector has the wrong length");
  }
  ad::Tape tape;
  const Tensor disease =
      tape.Leaf(std::vector<double>(u.begin(), u.begin() + n_disease_));
  std::optional<Tensor> mod_flat;
  std::optional<ModulatorTensors> mod;
  if (config_.use_modulator) {
    mod_flat = tape.Leaf(std::vector<double>(u.begin() + n_disease_, u.end()),
                         config_.train_modulator);
    mod = ModulatorTensorsFromFlat(*mod_flat, config_.hidden, config_.phi_max);
  }
  const ParamTensors p = ParamTensorsFromFlat(transform_.Constrain(disease));

  SimOptions o;
  o.horizon_days = static_cast<int>(7 * observed_.size());
  o.mode = config_.mode;
  o.temperature = config_.temperature;
  o.gate_sharpness = config_.gate_sharpness;
  o.seed_restriction = config_.seed_restriction;
  o.seed = DeriveSeed(config_.seed, static_cast<std::uint64_t>(iteration));
  const SimResult sim =
      Simulate(ctx_, p, mod ? &*mod : nullptr, policies_, o);
  const Tensor weekly = WeeklyAggregate(sim.daily_incidence);
  const Tensor loss = WeeklyLoss(weekly, observed_.cases, config_.normalize_loss);

  Objective out;
  out.loss = loss.item();
  out.weekly.assign(weekly.values().begin(), weekly.values().end());
  out.gradient.assign(size(), 0.0);
  const ad::GradientMap grads = tape.Backward(loss);
  const std::vector<double> gd = grads(disease);
  std::copy(gd.begin(), gd.end(), out.gradient.begin());
  if (mod_flat && config_.train_modulator) {
    const std::vector<double> gm = grads(*mod_flat);
    std::copy(gm.begin(), gm.end(), out.gradient.begin() + n_disease_);
  }
  return out;
}

FitResult Calibrate(const ModelContext& ctx, const ObservationSeries& observed,
                    const PolicySet& policies, const DiseaseParams& init,
                    const CalibrationConfig& config,
                    const ProgressFn& progress) {
  const CalibrationProblem problem(ctx, observed, policies, init, config);
  std::vector<double> u = problem.initial_point();
  std::vector<double> velocity(u.size(), 0.0), best_u = u;
  FitResult fit;
  for (int it = 0; it < config.iterations; ++it) {
    // Saturated transforms (theta_ir rounding onto theta_ei, say) end up
    // here as domain errors.
    DiseaseParams current;
    Objective obj;
    try {
      current = problem.Params(u);
      current.Validate();
      obj = problem.Evaluate(u, it);
    } catch (const DomainError& e) {
      throw DivergenceError(it, e.what());
    }
    if (!std::isfinite(obj.loss)) throw DivergenceError(it, "loss is not finite");
    if (!AllFinite(obj.gradient)) {
      throw DivergenceError(it, "gradient is not finite");
    }
    fit.loss_history.push_back(obj.loss);
    fit.beta_trajectory.push_back(current.beta);
    if (it == 0 || obj.loss < fit.best_loss) {
      fit.best_loss = obj.loss;
      fit.best_iteration = it;
      fit.simulated_weekly = obj.weekly;
      best_u = u;
    }
    double scale = 1.0;
    if (config.max_grad_norm > 0) {
      const double norm = std::sqrt(std::inner_product(
          obj.gradient.begin(), obj.gradient.end(), obj.gradient.begin(), 0.0));
      if (norm > config.max_grad_norm) scale = config.max_grad_norm / norm;
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] + scale * obj.gradient[i];
      u[i] -= config.learning_rate * velocity[i];
    }
    if (!AllFinite(u)) throw DivergenceError(it, "parameters are not finite");
    if (progress) progress(it, obj.loss);
  }
  if (config.iterations == 0) {
    const Objective obj = problem.Evaluate(u, 0);
    fit.best_loss = obj.loss;
    fit.simulated_weekly = obj.weekly;
  }
  fit.final_point = u;
  fit.params = problem.Params(best_u);
  fit.modulator = problem.Modulator(best_u);
  return fit;
}

std::string FitJson(const FitResult& fit, const std::string& config_hash) {
  Json j;
  Json params = Json::object();
  const std::vector<double> flat = Flatten(fit.params);
  for (std::size_t i = 0; i < flat.size(); ++i) params[ParamNames()[i]] = flat[i];
  j["params"] = params;
  if (fit.modulator) {
    j["modulator"] = {{"hidden", fit.modulator->hidden},
                      {"phi_max", fit.modulator->phi_max},
                      {"weights", Flatten(*fit.modulator)}};
  } else {
    j["modulator"] = nullptr;
  }
  j["loss_history"] = fit.loss_history;
  j["beta_trajectory"] = fit.beta_trajectory;
  j["simulated_weekly"] = fit.simulated_weekly;
  j["best_iteration"] = fit.best_iteration;
  j["best_loss"] = fit.best_loss;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

FitResult ParseFitJson(const std::string& text, const std::string& name) {
  FitResult fit;
  try {
    const Json j = Json::parse(text);
    std::vector<double> flat;
    for (const std::string& n : ParamNames()) {
      if (!j.at("params").contains(n)) {
        throw DataError(name + ": missing parameter '" + n + "'");
      }
      flat.push_back(j["params"][n].get<double>());
    }
    fit.params = UnflattenParams(flat);
    if (j.contains("modulator") && !j["modulator"].is_null()) {
      const Json& m = j["modulator"];
      const int hidden = m.at("hidden").get<int>();
      const auto w = m.at("weights").get<std::vector<double>>();
      if (hidden < 1 || w.size() != ModulatorSize(hidden)) {
        throw DataError(name + ": modulator weights do not match hidden size");
      }
      fit.modulator =
          UnflattenModulator(w, hidden, m.at("phi_max").get<double>());
    }
    fit.loss_history = j.value("loss_history", std::vector<double>{});
    fit.beta_trajectory = j.value("beta_trajectory", std::vector<double>{});
    fit.simulated_weekly = j.value("simulated_weekly", std::vector<double>{});
    fit.best_iteration = j.value("best_iteration", 0);
    fit.best_loss = j.value("best_loss", 0.0);
  } catch (const Json::exception& e) {
    throw DataError(name + ": " + e.what());
  }
  try {
    fit.params.Validate();
  } catch (const DomainError& e) {
    throw DataError(name + ": " + e.what());
  }
  return fit;
}

}  // namespace diffabm
