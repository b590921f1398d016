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


#ifndef DIFFABM_CALIBRATION_H_
#define DIFFABM_CALIBRATION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffabm/epi_model.h"

namespace diffabm {

// Weekly case counts for one region. Weeks are consecutive.
struct ObservationSeries {
  std::vector<int> week_index;
  std::vector<double> cases;
  std::string region;

  std::size_t size() const { return cases.size(); }
  // DataError unless weeks are consecutive, counts non-negative and the
  // series is nonempty.
  void Validate() const;
};

// observed.csv: week_index,cases
ObservationSeries LoadObservations(const std::string& path);
std::string ObservationsCsv(const ObservationSeries& obs);

// Maps every disease parameter to an unconstrained real and back: sigmoid
// for beta, phi, psi1 and psi2; 1 + softplus for the Gamma shape; theta_ir
// as theta_ei + softplus; softplus for everything else. Reference
// attribute categories and the names in `fixed` keep their base values.
class ParamTransform {
 public:
  // ConfigError on an unknown name, on fixing theta_ir while theta_ei is
  // learned, or if `base` is invalid.
  explicit ParamTransform(const DiseaseParams& base,
                          std::vector<std::string> fixed = {});

  std::vector<double> ToUnconstrained(const DiseaseParams& p) const;
  DiseaseParams FromUnconstrained(std::span<const double> u) const;
  // Differentiable version of FromUnconstrained, in the flat layout.
  Tensor Constrain(const Tensor& u) const;
  // 1 where the slot is optimized.
  const std::vector<double>& learnable() const { return learn_; }

 private:
  std::vector<double> base_;
  std::vector<double> learn_;
};

// Uniform on +-sqrt(6 / (fan_in + fan_out)).
std::vector<double> XavierUniform(int fan_in, int fan_out, std::size_t count,
                                  Rng& rng);

// Xavier gate and head weights, zero gate biases, head biases chosen so
// the initial R multiplier is 1 and the initial phi is `phi0`.
ModulatorWeights InitModulator(int hidden, double phi_max, double phi0,
                               Rng& rng);

// Consecutive sums of `week_length` days; a final partial week is kept.
Tensor WeeklyAggregate(const Tensor& daily, int week_length = 7);
std::vector<double> WeeklyAggregate(std::span<const double> daily,
                                    int week_length = 7);

// Mean squared error over weeks, divided by max(observed)^2 when
// `normalize` is set and the maximum is positive. LengthMismatch if sizes
// differ.
Tensor WeeklyLoss(const Tensor& sim_weekly, std::span<const double> observed,
                  bool normalize);

struct CalibrationConfig {
  int iterations = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  bool normalize_loss = true;
  // Rescales the update when the gradient norm exceeds this; 0 disables.
  double max_grad_norm = 0.0;
  Mode mode = Mode::kRelaxed;  // kHard uses straight-through gradients
  double temperature = ad::kDefaultTemperature;
  double gate_sharpness = 4.0;
  std::vector<std::string> fixed;
  bool use_modulator = true;
  bool train_modulator = true;
  int hidden = 16;
  double phi_max = 0.01;
  std::vector<std::int32_t> seed_restriction;
  std::uint64_t seed = 0;
  // First and last week the observations must cover, when set.
  std::optional<std::pair<int, int>> week_range;

  // ConfigError on out-of-range values.
  void Validate() const;
};

struct FitResult {
  DiseaseParams params;
  std::optional<ModulatorWeights> modulator;
  std::vector<double> loss_history;     // loss at the start of each iteration
  std::vector<double> beta_trajectory;  // beta at the start of each iteration
  std::vector<double> simulated_weekly;  // at the best iteration
  int best_iteration = 0;
  double best_loss = 0.0;
  std::vector<double> final_point;  // unconstrained, after the last update
};

// Loss and gradient of one calibration iteration: a relaxed (or
// straight-through) run with the noise of `iteration`, aggregated weekly and
// compared with `observed`. `u` holds the disease parameters followed by the
// modulator weights when the modulator is in use.
struct Objective {
  double loss = 0.0;
  std::vector<double> gradient;
  std::vector<double> weekly;
};

class CalibrationProblem {
 public:
  // WeekRangeMismatch if `observed` does not cover config.week_range.
  CalibrationProblem(const ModelContext& ctx, const ObservationSeries& observed,
                     const PolicySet& policies, const DiseaseParams& init,
                     const CalibrationConfig& config);

  std::size_t size() const;
  const std::vector<double>& initial_point() const { return u0_; }
  const ParamTransform& transform() const { return transform_; }
  Objective Evaluate(std::span<const double> u, int iteration) const;
  DiseaseParams Params(std::span<const double> u) const;
  std::optional<ModulatorWeights> Modulator(std::span<const double> u) const;

 private:
  const ModelContext& ctx_;
  const ObservationSeries& observed_;
  PolicySet policies_;
  CalibrationConfig config_;
  ParamTransform transform_;
  std::size_t n_disease_;
  std::vector<double> u0_;
};

using ProgressFn = std::function<void(int iteration, double loss)>;

// SGD with momentum in unconstrained space. DivergenceError if the loss or
// gradient stops being finite.
FitResult Calibrate(const ModelContext& ctx, const ObservationSeries& observed,
                    const PolicySet& policies, const DiseaseParams& init,
                    const CalibrationConfig& config,
                    const ProgressFn& progress = nullptr);

// fit.json: params, modulator, loss_history, beta_trajectory,
// simulated_weekly, best_iteration, best_loss and config_hash.
std::string FitJson(const FitResult& fit, const std::string& config_hash = "");
FitResult ParseFitJson(const std::string& text, const std::string& name);

}  // namespace diffabm

#endif  // DIFFABM_CALIBRATION_H_
