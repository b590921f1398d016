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


// Command-line front end: population synthesis, simulation, calibration,
// ensembles, reports and cross-region transfer.

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffabm/calibration.h"
#include "diffabm/config.h"
#include "diffabm/ensemble.h"
#include "diffabm/epi_model.h"
#include "diffabm/errors.h"
#include "diffabm/io/csv.h"
#include "diffabm/metrics.h"
#include "diffabm/population.h"

namespace fs = std::filesystem;
using namespace diffabm;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kDiverged = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;

  std::string population;
  std::string observed;
  std::string fit;
  std::string ensemble;
  std::string infections;
  std::optional<std::int64_t> seed_count;
  std::string seed_region;
  std::string mode;
  bool reporting = false;
};

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)) {
    config_ = opt.config.empty() ? RunConfig{} : LoadConfig(opt.config);
    if (!opt.config.empty()) inputs_.push_back(opt.config);
    if (opt.seed) config_.SetSeed(*opt.seed);
    if (!opt.out.empty()) config_.io.output_dir = opt.out;
    auto override = [](std::string& dst, const std::string& flag) {
      if (!flag.empty()) dst = flag;
    };
    override(config_.io.population, opt.population);
    override(config_.io.observed, opt.observed);
    override(config_.io.fit, opt.fit);
    override(config_.io.ensemble, opt.ensemble);
    if (opt.seed_count) config_.simulation.seed_count = opt.seed_count;
    override(config_.simulation.seed_region, opt.seed_region);
    if (!opt.mode.empty()) {
      if (opt.mode != "hard" && opt.mode != "relaxed") {
        throw ConfigError("--mode must be hard or relaxed");
      }
      config_.simulation.mode = opt.mode == "hard" ? Mode::kHard : Mode::kRelaxed;
    }
    config_.Validate();
    hash_ = ConfigHash(config_);
  }

  RunConfig& config() { return config_; }
  const std::string& hash() const { return hash_; }

  // DataError unless `path` exists; recorded as an input.
  std::string Input(const std::string& path, const std::string& what) {
    if (path.empty()) throw DataError("no " + what + " given");
    if (!fs::exists(path)) throw DataError(what + " not found: " + path);
    inputs_.push_back(path);
    return path;
  }

  Population LoadOrSynthesize() {
    if (config_.io.population.empty()) {
      std::cout << "synthesizing " << config_.population.n_agents
                << " agents\n";
      return GenerateSynthetic(config_.population, config_.seed);
    }
    fs::path p = Input(config_.io.population, "population");
    if (fs::is_regular_file(p)) p = p.parent_path();
    return LoadPopulation(p);
  }

  void Write(const std::string& name, const std::string& contents) {
    const fs::path path = fs::path(config_.io.output_dir) / name;
    io::WriteFile(path, contents);
    outputs_.push_back(path.string());
    std::cout << "wrote " << path.string() << "\n";
  }

  void Manifest() {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["version"] = DIFFABM_VERSION;
    j["config_hash"] = hash_;
    j["seed"] = config_.seed;
    j["threads"] = omp_get_max_threads();
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["config"] = ConfigToToml(config_);
    const fs::path path = fs::path(config_.io.output_dir) / "run.json";
    io::WriteFile(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig config_;
  std::string hash_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::int32_t> SeedRestriction(const Population& pop,
                                          const std::string& region) {
  if (region.empty()) return {};
  const std::int32_t r = pop.RegionIndex(region);
  if (r < 0) throw DataError("unknown seed region '" + region + "'");
  std::vector<std::int32_t> ids;
  for (std::size_t a = 0; a < pop.size(); ++a) {
    if (pop.agents[a].region == r) ids.push_back(static_cast<std::int32_t>(a));
  }
  return ids;
}

// Disease parameters and modulator from fit.json when one is configured.
std::pair<DiseaseParams, std::optional<ModulatorWeights>> Model(Run& run) {
  const std::string& fit = run.config().io.fit;
  if (fit.empty()) return {run.config().disease, std::nullopt};
  const FitResult f = ParseFitJson(ReadText(run.Input(fit, "fit")), fit);
  return {f.params, f.modulator};
}

int SynthPop(const Options& opt) {
  Run run("synth-pop", opt);
  const Population pop = GenerateSynthetic(run.config().population,
                                           run.config().seed);
  const fs::path dir = run.config().io.output_dir;
  WritePopulation(pop, dir);
  std::cout << "wrote " << pop.size() << " agents and " << pop.venues.size()
            << " venues to " << dir.string() << "\n";
  run.Manifest();
  return kOk;
}

int SimulateCmd(const Options& opt) {
  Run run("simulate", opt);
  const auto [params, modulator] = Model(run);
  const Population pop = run.LoadOrSynthesize();
  const ContactGraph graph(pop);
  const ModelContext ctx(pop, graph);
  const RunConfig& c = run.config();
  SimOptions o;
  o.horizon_days = c.simulation.horizon_days;
  o.mode = c.simulation.mode;
  o.temperature = c.simulation.temperature;
  o.gate_sharpness = c.simulation.gate_sharpness;
  o.seed_count = c.simulation.seed_count;
  o.seed_restriction = SeedRestriction(pop, c.simulation.seed_region);
  o.seed = c.seed;
  const std::optional<ModulatorTensors> mod =
      modulator ? std::optional(ModulatorTensors::Constant(*modulator))
                : std::nullopt;
  const SimResult r = Simulate(ctx, ParamTensors::Constant(params),
                               mod ? &*mod : nullptr, c.policies, o);
  double total = 0.0;
  for (double v : r.trace.new_infections) total += v;
  std::cout << "simulated " << o.horizon_days << " days, " << total
            << " infections\n";
  run.Write("trace.csv", TraceCsv(r.trace));
  run.Manifest();
  return kOk;
}

int CalibrateCmd(const Options& opt) {
  Run run("calibrate", opt);
  RunConfig& c = run.config();
  const ObservationSeries obs =
      LoadObservations(run.Input(c.io.observed, "observations"));
  const Population pop = run.LoadOrSynthesize();
  const ContactGraph graph(pop);
  const ModelContext ctx(pop, graph);
  c.calibration.seed_restriction = SeedRestriction(pop, c.simulation.seed_region);
  const FitResult fit = Calibrate(
      ctx, obs, c.policies, c.disease, c.calibration, [](int it, double loss) {
        if (it % 10 == 0) {
          std::cout << "iteration " << it << " loss " << loss << "\n";
        }
      });
  std::cout << "best loss " << fit.best_loss << " at iteration "
            << fit.best_iteration << "\n";
  run.Write("fit.json", FitJson(fit, run.hash()));
  run.Manifest();
  return kOk;
}

// Runs the ensemble and writes its files; returns the summary.
EnsembleSummary EnsembleOutputs(Run& run, const Population& pop,
                                const DiseaseParams& params,
                                const std::optional<ModulatorWeights>& mod,
                                const std::optional<ObservationSeries>& obs) {
  const RunConfig& c = run.config();
  const ContactGraph graph(pop);
  const ModelContext ctx(pop, graph);
  EnsembleConfig e = c.ensemble;
  e.seed_count = c.simulation.seed_count;
  e.seed_restriction = SeedRestriction(pop, c.simulation.seed_region);
  if (obs) {
    e.horizon_days = static_cast<int>(7 * obs->size());
    e.first_week = obs->week_index.front();
  }
  std::cout << "running " << e.n_members << " members on "
            << omp_get_max_threads() << " threads\n";
  const EnsembleResult r =
      RunEnsemble(ctx, params, mod ? &*mod : nullptr, c.policies, e);
  run.Write("ensemble.csv", EnsembleCsv(r.summary));
  run.Write("members.csv", MembersCsv(r, e.first_week));
  run.Write("infections.csv", InfectionsCsv(r, pop));
  return r.summary;
}

int EnsembleCmd(const Options& opt) {
  Run run("ensemble", opt);
  const auto [params, modulator] = Model(run);
  std::optional<ObservationSeries> obs;
  if (!run.config().io.observed.empty()) {
    obs = LoadObservations(run.Input(run.config().io.observed, "observations"));
  }
  const Population pop = run.LoadOrSynthesize();
  EnsembleOutputs(run, pop, params, modulator, obs);
  run.Manifest();
  return kOk;
}

void WriteReport(Run& run, ComparisonReport report) {
  run.Write("report.json", ReportJson(report, run.hash()));
  run.Write("curves.csv", CurvesCsv(report));
  run.Write("breakdown.csv", BreakdownCsv(report));
  std::cout << "cumulative simulated " << report.cumulative_sim
            << ", observed " << report.cumulative_obs << "; peak week "
            << report.peak_sim.week << " (" << report.peak_sim.value
            << ") vs " << report.peak_obs.week << " ("
            << report.peak_obs.value << ")\n";
}

int ReportCmd(const Options& opt) {
  Run run("report", opt);
  const RunConfig& c = run.config();
  const EnsembleSummary sim =
      LoadEnsembleCsv(run.Input(c.io.ensemble, "ensemble summary"));
  const ObservationSeries obs =
      LoadObservations(run.Input(c.io.observed, "observations"));
  ComparisonReport report = MakeComparisonReport(sim, obs);
  if (!opt.infections.empty()) {
    const io::CsvFile csv(run.Input(opt.infections, "infections"),
                          "member,agent_id,infection_day");
    fs::path p = run.Input(c.io.population, "population");
    if (fs::is_regular_file(p)) p = p.parent_path();
    const Population pop = LoadPopulation(p);
    std::unordered_map<std::int64_t, std::int32_t> index;
    for (std::size_t a = 0; a < pop.size(); ++a) {
      index.emplace(pop.agents[a].id, static_cast<std::int32_t>(a));
    }
    std::vector<std::int32_t> infected;
    for (const io::CsvRow& row : csv.rows()) {
      const auto it = index.find(csv.Int(row, 1));
      if (it == index.end()) csv.Fail(row, "agent not in population");
      infected.push_back(it->second);
    }
    const std::optional<double> psi2 =
        opt.reporting ? std::optional(Model(run).first.psi2) : std::nullopt;
    report.by_ethnicity = Breakdown(pop, infected, "ethnicity", psi2);
    report.by_age_band = Breakdown(pop, infected, "age_band", psi2);
  }
  WriteReport(run, std::move(report));
  run.Manifest();
  return kOk;
}

int TransferCmd(const Options& opt) {
  Run run("transfer", opt);
  if (run.config().io.fit.empty()) throw DataError("transfer needs --fit");
  if (run.config().io.population.empty()) {
    throw DataError("transfer needs --population");
  }
  if (!run.config().simulation.seed_count) {
    throw DataError("transfer needs --seed-count");
  }
  const auto [params, modulator] = Model(run);
  std::optional<ObservationSeries> obs;
  if (!run.config().io.observed.empty()) {
    obs = LoadObservations(run.Input(run.config().io.observed, "observations"));
  }
  const Population pop = run.LoadOrSynthesize();
  std::cout << "transferring fit to " << pop.size() << " agents with "
            << *run.config().simulation.seed_count << " seed infections\n";
  const EnsembleSummary s = EnsembleOutputs(run, pop, params, modulator, obs);
  if (obs) WriteReport(run, MakeComparisonReport(s, *obs));
  run.Manifest();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable agent-based epidemic simulator", "diffabm"};
  app.set_version_flag("--version", std::string("diffabm ") + DIFFABM_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config, "TOML run configuration");
  app.add_option("--seed", opt.seed, "Seed for every random stream");
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--threads", opt.threads, "Worker threads (0: all cores)")
      ->check(CLI::NonNegativeNumber);

  auto* synth = app.add_subcommand("synth-pop", "Generate a synthetic population");
  auto* sim = app.add_subcommand("simulate", "Run one simulation, write trace.csv");
  sim->add_option("--population", opt.population, "Population directory");
  sim->add_option("--fit", opt.fit, "Use parameters from fit.json");
  sim->add_option("--mode", opt.mode, "hard or relaxed");
  sim->add_option("--seed-count", opt.seed_count, "Exact number of seed infections");
  sim->add_option("--seed-region", opt.seed_region, "Seed only in this region");
  auto* cal = app.add_subcommand("calibrate", "Fit parameters to observed.csv");
  cal->add_option("--population", opt.population, "Population directory");
  cal->add_option("--observed", opt.observed, "Weekly observations");
  auto* ens = app.add_subcommand("ensemble", "Run an ensemble, write quantiles");
  ens->add_option("--population", opt.population, "Population directory");
  ens->add_option("--fit", opt.fit, "Use parameters from fit.json");
  ens->add_option("--observed", opt.observed, "Align weeks with observations");
  ens->add_option("--seed-count", opt.seed_count, "Exact number of seed infections");
  auto* rep = app.add_subcommand("report", "Compare an ensemble with observations");
  rep->add_option("--ensemble", opt.ensemble, "ensemble.csv");
  rep->add_option("--observed", opt.observed, "observed.csv");
  rep->add_option("--infections", opt.infections, "infections.csv for breakdowns");
  rep->add_option("--population", opt.population, "Population for breakdowns");
  rep->add_option("--fit", opt.fit, "fit.json supplying psi2 for --reporting");
  rep->add_flag("--reporting", opt.reporting,
                "Down-weight vaccinated infections in breakdowns");
  auto* tr = app.add_subcommand("transfer", "Run a fitted model on another region");
  tr->add_option("--fit", opt.fit, "fit.json from the source region")->required();
  tr->add_option("--population", opt.population, "Target population")->required();
  tr->add_option("--seed-count", opt.seed_count, "Seed infections in the target")
      ->required();
  tr->add_option("--seed-region", opt.seed_region, "Seed only in this region");
  tr->add_option("--observed", opt.observed, "Target observations for a report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  if (opt.threads > 0) omp_set_num_threads(opt.threads);

  try {
    if (*synth) return SynthPop(opt);
    if (*sim) return SimulateCmd(opt);
    if (*cal) return CalibrateCmd(opt);
    if (*ens) return EnsembleCmd(opt);
    if (*rep) return ReportCmd(opt);
    if (*tr) return TransferCmd(opt);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
