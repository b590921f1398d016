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


#ifndef DIFFABM_CONFIG_H_
#define DIFFABM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "diffabm/calibration.h"
#include "diffabm/ensemble.h"
#include "diffabm/epi_model.h"
#include "diffabm/interventions.h"
#include "diffabm/population.h"

namespace diffabm {

// Settings for single runs that are not disease parameters.
struct SimulationSettings {
  int horizon_days = 70;
  Mode mode = Mode::kHard;
  double temperature = ad::kDefaultTemperature;
  double gate_sharpness = 4.0;
  std::optional<std::int64_t> seed_count;
  std::string seed_region;  // empty: seeds anywhere
};

// Input and output locations. Relative paths in a config file are taken
// relative to that file.
struct IoPaths {
  std::string population;  // directory with agents.csv and venues.csv
  std::string observed;
  std::string fit;
  std::string ensemble;
  std::string output_dir = "out";
};

struct RunConfig {
  std::uint64_t seed = 0;
  PopulationSpec population;
  DiseaseParams disease;
  SimulationSettings simulation;
  PolicySet policies;
  CalibrationConfig calibration;
  EnsembleConfig ensemble;
  IoPaths io;

  // The one seed drives simulation, calibration and ensemble streams.
  void SetSeed(std::uint64_t s);
  // Validates every section; ConfigError or InvalidSpec on failure.
  void Validate() const;
};

// Parses TOML text. ConfigError on syntax errors, unknown keys, wrong value
// types or invalid values. `base_dir` anchors relative [io] paths.
RunConfig ParseConfig(const std::string& text, const std::string& name,
                      const std::filesystem::path& base_dir = {});
RunConfig LoadConfig(const std::filesystem::path& path);

// Every resolved setting as TOML; parsing it back gives the same config.
std::string ConfigToToml(const RunConfig& config);
// 64-bit FNV-1a of ConfigToToml, as 16 hex digits.
std::string ConfigHash(const RunConfig& config);
std::uint64_t Fnv1a64(std::string_view bytes);

}  // namespace diffabm

#endif  // DIFFABM_CONFIG_H_
