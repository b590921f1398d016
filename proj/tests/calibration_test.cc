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
#include <numeric>

#include "diffabm/calibration.h"
#include "diffabm/errors.h"
#include "diffabm/io/csv.h"
#include "gradcheck.h"
#include "sim_fixtures.h"

using namespace diffabm;
using diffabm::testing::FastParams;
using diffabm::testing::SmallTown;

namespace {

DiseaseParams RandomParams(Rng& rng) {
  DiseaseParams p;
  p.beta = std::exp(rng.Uniform(-12, -0.1));
  p.phi = rng.Uniform(0, 0.5);
  p.theta_ei = rng.Uniform(0.1, 20);
  p.theta_ir = p.theta_ei + rng.Uniform(0.01, 20);
  p.gamma_shape = 1 + rng.Uniform(0.01, 10);
  p.gamma_scale = rng.Uniform(0.05, 5);
  p.R = rng.Uniform(0.001, 3);
  for (double& r : p.venue.rho) r = rng.Uniform(0.01, 5);
  for (double& q : p.venue.q) q = rng.Uniform(0.01, 5);
  p.psi1 = rng.Uniform(0.01, 0.99);
  p.psi2 = rng.Uniform(0.01, 0.99);
  for (int b = 0; b < kNumAgeBands; ++b) {
    if (b != AttributeFactors::kAgeReference) p.attr.age[b] = rng.Uniform(0.1, 3);
  }
  p.attr.sex[1] = rng.Uniform(0.1, 3);
  p.attr.ethnicity[0] = rng.Uniform(0.1, 3);
  p.attr.vaccination[1] = rng.Uniform(0.1, 3);
  return p;
}

ObservationSeries Series(std::vector<double> cases, int first = 26) {
  ObservationSeries s;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    s.week_index.push_back(first + static_cast<int>(i));
  }
  s.cases = std::move(cases);
  return s;
}

std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("diffabm_cal_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("transforms round trip and stay valid") {
  Rng rng(5);
  const ParamTransform t(FastParams());
  for (int i = 0; i < 500; ++i) {
    const DiseaseParams p = RandomParams(rng);
    const std::vector<double> back = Flatten(t.FromUnconstrained(t.ToUnconstrained(p)));
    const std::vector<double> want = Flatten(p);
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(std::abs(back[k] - want[k]) <= 1e-9 * std::max(1.0, std::abs(want[k])));
    }
  }
  for (int i = 0; i < 500; ++i) {
    std::vector<double> u(ParamNames().size());
    for (double& x : u) x = rng.Uniform(-15, 15);
    const DiseaseParams p = t.FromUnconstrained(u);
    CHECK_NOTHROW(p.Validate());
    const Tensor c = t.Constrain(Tensor::Constant(u));
    const std::vector<double> flat = Flatten(p);
    for (std::size_t k = 0; k < flat.size(); ++k) {
      CHECK(c[k] == doctest::Approx(flat[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("fixed parameters and reference categories are not learned") {
  DiseaseParams base = FastParams();
  base.R = 0.37;
  const ParamTransform t(base, {"R", "rho.school"});
  const std::vector<std::string>& names = ParamNames();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool frozen = names[i] == "R" || names[i] == "rho.school" ||
                        names[i] == "attr.age.25-44" ||
                        names[i] == "attr.sex.female" ||
                        names[i] == "attr.ethnicity.European" ||
                        names[i] == "attr.vaccination.unvaccinated";
    CHECK(t.learnable()[i] == (frozen ? 0.0 : 1.0));
  }
  std::vector<double> u(names.size(), 3.0);
  CHECK(t.FromUnconstrained(u).R == 0.37);
  CHECK_THROWS_AS(ParamTransform(base, {"nonsense"}), ConfigError);
  CHECK_THROWS_AS(ParamTransform(base, {"theta_ir"}), ConfigError);
  CHECK_NOTHROW(ParamTransform(base, {"theta_ir", "theta_ei"}));
}

TEST_CASE("xavier initialization") {
  Rng a(11), b(11);
  const std::vector<double> w = XavierUniform(1, 1, 1000, a);
  for (double x : w) CHECK(std::abs(x) <= std::sqrt(3.0));
  CHECK(w == XavierUniform(1, 1, 1000, b));

  Rng c(12);
  const std::vector<double> many = XavierUniform(16, 17, 10000, c);
  const double bound = std::sqrt(6.0 / 33.0);
  const double mean = std::accumulate(many.begin(), many.end(), 0.0) / 1e4;
  // Uniform(-b, b) has sd b / sqrt(3).
  CHECK(std::abs(mean) < 3 * bound / std::sqrt(3.0) / 100.0);
  CHECK(*std::max_element(many.begin(), many.end()) <= bound);

  Rng d(13);
  const ModulatorWeights m = InitModulator(4, 0.01, 0.002, d);
  const LstmOutput out = LstmStep(ModulatorTensors::Constant(m),
                                  Tensor::Full({4}, 0.0),
                                  Tensor::Full({4}, 0.0), Tensor::Constant({0.0}));
  CHECK(out.r_multiplier.item() == doctest::Approx(1.0));
  CHECK(out.phi.item() == doctest::Approx(0.002));
}

TEST_CASE("weekly aggregation") {
  CHECK(WeeklyAggregate(std::vector<double>(14, 0.0)) ==
        std::vector<double>{0, 0});
  CHECK(WeeklyAggregate(std::vector<double>(14, 1.0)) ==
        std::vector<double>{7, 7});
  std::vector<double> ten(10);
  std::iota(ten.begin(), ten.end(), 1.0);
  CHECK(WeeklyAggregate(ten) == std::vector<double>{28, 27});

  ad::Tape tape;
  const Tensor daily = tape.Leaf(ten);
  const auto g = tape.Backward(ad::Sum(WeeklyAggregate(daily) *
                                       Tensor::Constant({1.0, 2.0})))(daily);
  for (int d = 0; d < 10; ++d) CHECK(g[d] == (d < 7 ? 1.0 : 2.0));
}

TEST_CASE("weekly loss") {
  const Tensor a = Tensor::Constant({3.0, 5.0, 1.0});
  const std::vector<double> same{3.0, 5.0, 1.0};
  CHECK(WeeklyLoss(a, same, false).item() == 0.0);
  CHECK(WeeklyLoss(Tensor::Constant({1.0, 2.0}), std::vector<double>{1, 4},
                   false)
            .item() == 2.0);
  CHECK(WeeklyLoss(Tensor::Constant({1.0, 2.0}), std::vector<double>{1, 4},
                   true)
            .item() == doctest::Approx(2.0 / 16.0));
  const std::vector<double> obs{2.0, 7.0, 0.5};
  const double l1 = WeeklyLoss(a, obs, false).item();
  const double l2 = WeeklyLoss(Tensor::Constant({1.0, 3.0, 5.0}),
                               std::vector<double>{0.5, 2.0, 7.0}, false)
                        .item();
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-15));
  CHECK(l1 >= 0.0);
  CHECK_THROWS_AS(WeeklyLoss(a, std::vector<double>{1, 2}, false),
                  LengthMismatch);
}

TEST_CASE("observations load and validate") {
  const auto dir = TempDir("obs");
  io::WriteFile(dir / "ok.csv", "week_index,cases\n26,0\n27,5\n28,12\n");
  const ObservationSeries s = LoadObservations((dir / "ok.csv").string());
  CHECK(s.week_index == std::vector<int>{26, 27, 28});
  CHECK(s.cases == std::vector<double>{0, 5, 12});
  CHECK(ObservationsCsv(s) == "week_index,cases\n26,0\n27,5\n28,12\n");

  io::WriteFile(dir / "gap.csv", "week_index,cases\n26,0\n28,5\n");
  CHECK_THROWS_AS(LoadObservations((dir / "gap.csv").string()), ParseError);
  io::WriteFile(dir / "neg.csv", "week_index,cases\n26,-1\n");
  CHECK_THROWS_AS(LoadObservations((dir / "neg.csv").string()), ParseError);
  io::WriteFile(dir / "empty.csv", "week_index,cases\n");
  CHECK_THROWS_AS(LoadObservations((dir / "empty.csv").string()), ParseError);
  CHECK_THROWS_AS(LoadObservations((dir / "missing.csv").string()),
                  ParseError);
}

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  const Population pop = SmallTown(200, 3);
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  CalibrationConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.iterations = 100;
  cfg.hidden = 4;
  const DiseaseParams init = FastParams();
  const FitResult fit =
      Calibrate(ctx, Series({1, 5, 9, 4}), {}, init, cfg);
  CHECK(fit.loss_history.size() == 100);
  CHECK(fit.beta_trajectory.size() == 100);
  const std::vector<double> got = Flatten(fit.params), want = Flatten(init);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  for (double b : fit.beta_trajectory) CHECK(b == fit.beta_trajectory[0]);
}

TEST_CASE("one calibration step moves along the finite-difference gradient") {
  const Population pop = SmallTown(50, 8);
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  const ObservationSeries obs = Series({2, 6});
  DiseaseParams init = FastParams();
  init.beta = 0.05;
  init.phi = 0.002;
  CalibrationConfig cfg;
  cfg.iterations = 1;
  cfg.learning_rate = 0.01;
  cfg.hidden = 3;
  cfg.seed = 4;
  const CalibrationProblem problem(ctx, obs, {}, init, cfg);
  const std::vector<double> u0 = problem.initial_point();
  const std::vector<double> fd = diffabm::testing::CentralDifference(
      [&](const std::vector<double>& u) { return problem.Evaluate(u, 0).loss; },
      u0, 1e-5);
  const FitResult fit = Calibrate(ctx, obs, {}, init, cfg);
  REQUIRE(fit.final_point.size() == u0.size());
  double scale = 0;
  for (double x : fd) scale = std::max(scale, std::abs(x));
  REQUIRE(scale > 0);
  for (std::size_t i = 0; i < u0.size(); ++i) {
    const double delta = fit.final_point[i] - u0[i];
    INFO("slot ", i);
    CHECK(diffabm::testing::RelativeError(delta, -cfg.learning_rate * fd[i],
                                          1e-6 * cfg.learning_rate * scale) <
          1e-3);
  }
}

TEST_CASE("calibration is reproducible and descends on frozen noise") {
  const Population pop = SmallTown(1000, 21);
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  DiseaseParams truth = FastParams();
  truth.beta = 0.01;
  truth.R = 0.25;
  SimOptions o;
  o.horizon_days = 42;
  o.seed = 2;
  const EpidemicTrace t =
      Simulate(ctx, ParamTensors::Constant(truth), nullptr, {}, o).trace;
  const ObservationSeries obs = Series(WeeklyAggregate(t.new_infections));
  DiseaseParams init = truth;
  init.beta = 0.004;
  init.R = 0.12;
  CalibrationConfig cfg;
  cfg.iterations = 12;
  cfg.hidden = 4;
  cfg.seed = 9;

  const FitResult a = Calibrate(ctx, obs, {}, init, cfg);
  const FitResult b = Calibrate(ctx, obs, {}, init, cfg);
  CHECK(FitJson(a) == FitJson(b));
  CHECK(a.best_loss <= a.loss_history[0]);

  cfg.learning_rate = 0.005;
  cfg.momentum = 0.0;
  const CalibrationProblem problem(ctx, obs, {}, init, cfg);
  std::vector<double> u = problem.initial_point();
  const double first = problem.Evaluate(u, 0).loss;
  for (int it = 0; it < 10; ++it) {
    const Objective obj = problem.Evaluate(u, 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] -= cfg.learning_rate * obj.gradient[i];
    }
  }
  CHECK(problem.Evaluate(u, 0).loss < first);
}

TEST_CASE("runaway steps raise a divergence error") {
  const Population pop = SmallTown(200, 4);
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  CalibrationConfig cfg;
  cfg.iterations = 30;
  cfg.learning_rate = 1e3;
  cfg.normalize_loss = false;
  DiseaseParams init = FastParams();
  init.beta = 0.02;
  try {
    Calibrate(ctx, Series({1, 10, 30, 5}), {}, init, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() >= 0);
    CHECK(e.iteration() < 30);
  }
}

TEST_CASE("config validation") {
  CalibrationConfig c;
  CHECK_NOTHROW(c.Validate());
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.phi_max = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("fit json round trips") {
  FitResult fit;
  fit.params = FastParams();
  fit.params.attr.age[1] = 0.123456789012345;
  Rng rng(3);
  fit.modulator = InitModulator(3, 0.02, 0.001, rng);
  fit.loss_history = {1.5, 0.25};
  fit.beta_trajectory = {0.01, 0.011};
  fit.simulated_weekly = {3, 4};
  fit.best_iteration = 1;
  fit.best_loss = 0.25;
  const std::string text = FitJson(fit, "abc");
  const FitResult back = ParseFitJson(text, "fit.json");
  CHECK(Flatten(back.params) == Flatten(fit.params));
  REQUIRE(back.modulator);
  CHECK(Flatten(*back.modulator) == Flatten(*fit.modulator));
  CHECK(FitJson(back, "abc") == text);
  CHECK_THROWS_AS(ParseFitJson("{", "x"), DataError);
  CHECK_THROWS_AS(ParseFitJson("{\"params\": {}}", "x"), DataError);
}

TEST_CASE("observations must cover the configured weeks") {
  const Population pop = SmallTown(100, 2);
  const ContactGraph g(pop);
  const ModelContext ctx(pop, g);
  CalibrationConfig cfg;
  cfg.iterations = 1;
  cfg.week_range = std::pair{26, 28};
  CHECK_NOTHROW(Calibrate(ctx, Series({1, 2, 3}, 26), {}, FastParams(), cfg));
  CHECK_THROWS_AS(Calibrate(ctx, Series({1, 2, 3}, 27), {}, FastParams(), cfg),
                  WeekRangeMismatch);
  CHECK_THROWS_AS(Calibrate(ctx, Series({1, 2}, 26), {}, FastParams(), cfg),
                  WeekRangeMismatch);
}
