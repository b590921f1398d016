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


#include "diffabm/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "diffabm/errors.h"
#include "diffabm/io/csv.h"

namespace diffabm {
namespace {

// One TOML table plus the keys read from it, so leftovers can be reported.
class Section {
 public:
  Section(const toml::table* table, std::string path)
      : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }

  void Real(const char* key, double& out) {
    if (const toml::node* n = Find(key)) {
      if (n->is_floating_point()) {
        out = n->as_floating_point()->get();
      } else if (n->is_integer()) {
        out = static_cast<double>(n->as_integer()->get());
      } else {
        Fail(key, "expected a number");
      }
    }
  }

  template <typename Int>
  void Integer(const char* key, Int& out) {
    if (const toml::node* n = Find(key)) {
      if (!n->is_integer()) Fail(key, "expected an integer");
      out = static_cast<Int>(n->as_integer()->get());
    }
  }

  void OptionalInteger(const char* key, std::optional<std::int64_t>& out) {
    if (const toml::node* n = Find(key)) {
      if (!n->is_integer()) Fail(key, "expected an integer");
      out = n->as_integer()->get();
    }
  }

  void Seed(const char* key, std::uint64_t& out) {
    if (const toml::node* n = Find(key)) {
      if (!n->is_integer() || n->as_integer()->get() < 0) {
        Fail(key, "expected a non-negative integer");
      }
      out = static_cast<std::uint64_t>(n->as_integer()->get());
    }
  }

  void Bool(const char* key, bool& out) {
    if (const toml::node* n = Find(key)) {
      if (!n->is_boolean()) Fail(key, "expected true or false");
      out = n->as_boolean()->get();
    }
  }

  void String(const char* key, std::string& out) {
    if (const toml::node* n = Find(key)) {
      if (!n->is_string()) Fail(key, "expected a string");
      out = n->as_string()->get();
    }
  }

  void ModeValue(const char* key, Mode& out) {
    std::string s;
    String(key, s);
    if (s.empty()) return;
    if (s == "hard") {
      out = Mode::kHard;
    } else if (s == "relaxed") {
      out = Mode::kRelaxed;
    } else {
      Fail(key, "expected \"hard\" or \"relaxed\"");
    }
  }

  void Reals(const char* key, std::vector<double>& out) {
    if (const toml::node* n = Find(key)) {
      const toml::array* a = n->as_array();
      if (!a) Fail(key, "expected an array of numbers");
      out.clear();
      for (const toml::node& e : *a) {
        if (e.is_floating_point()) {
          out.push_back(e.as_floating_point()->get());
        } else if (e.is_integer()) {
          out.push_back(static_cast<double>(e.as_integer()->get()));
        } else {
          Fail(key, "expected an array of numbers");
        }
      }
    }
  }

  template <std::size_t N>
  void Reals(const char* key, std::array<double, N>& out) {
    std::vector<double> v(out.begin(), out.end());
    Reals(key, v);
    if (v.size() != N) {
      Fail(key, "expected " + std::to_string(N) + " numbers");
    }
    std::copy(v.begin(), v.end(), out.begin());
  }

  void Strings(const char* key, std::vector<std::string>& out) {
    if (const toml::node* n = Find(key)) {
      const toml::array* a = n->as_array();
      if (!a) Fail(key, "expected an array of strings");
      out.clear();
      for (const toml::node& e : *a) {
        if (!e.is_string()) Fail(key, "expected an array of strings");
        out.push_back(e.as_string()->get());
      }
    }
  }

  // Named entries such as rho.household = 1.0, keyed by category names.
  template <std::size_t N, typename NameFn>
  void Categories(const char* key, std::array<double, N>& out, NameFn name) {
    Section sub = Sub(key);
    if (!sub.present()) return;
    for (std::size_t i = 0; i < N; ++i) {
      const std::string n(name(i));
      sub.Real(n.c_str(), out[i]);
    }
    sub.Done();
  }

  Section Sub(const char* key) {
    const toml::node* n = Find(key);
    if (!n) return Section(nullptr, Join(key));
    if (!n->is_table()) Fail(key, "expected a table");
    return Section(n->as_table(), Join(key));
  }

  // ConfigError naming the first key that was never read.
  void Done() const {
    if (!table_) return;
    for (auto&& [k, v] : *table_) {
      const std::string key(k.str());
      if (!used_.count(key)) {
        throw ConfigError("unknown key '" + Join(key.c_str()) + "'");
      }
    }
  }

  [[noreturn]] void Fail(const char* key, const std::string& what) const {
    throw ConfigError("'" + Join(key) + "': " + what);
  }

 private:
  const toml::node* Find(const char* key) {
    if (!table_) return nullptr;
    const toml::node* n = table_->get(key);
    if (n) used_.insert(key);
    return n;
  }

  std::string Join(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string> used_;
};

void ReadPopulation(Section s, PopulationSpec& p) {
  s.Integer("n_agents", p.n_agents);
  s.Strings("regions", p.regions);
  s.Reals("household_size_weights", p.household_size_weights);
  s.Real("mean_household_size", p.mean_household_size);
  s.Integer("max_household_size", p.max_household_size);
  s.Integer("school_count", p.school_count);
  s.Integer("workplace_count", p.workplace_count);
  s.Integer("pub_count", p.pub_count);
  s.Integer("cinema_count", p.cinema_count);
  s.Integer("other_count", p.other_count);
  s.Real("employment_fraction", p.employment_fraction);
  s.Real("pub_fraction", p.pub_fraction);
  s.Real("cinema_fraction", p.cinema_fraction);
  s.Real("other_fraction", p.other_fraction);
  s.Reals("age_marginal", p.age_marginal);
  s.Reals("sex_marginal", p.sex_marginal);
  s.Reals("ethnicity_marginal", p.ethnicity_marginal);
  s.Reals("vaccination_coverage", p.vaccination_coverage);
  s.Done();
}

std::string_view VaccinationName(std::size_t i) {
  return i == 0 ? "unvaccinated" : "vaccinated";
}

void ReadDisease(Section s, DiseaseParams& d) {
  s.Real("beta", d.beta);
  s.Real("phi", d.phi);
  s.Real("theta_ei", d.theta_ei);
  s.Real("theta_ir", d.theta_ir);
  s.Real("gamma_shape", d.gamma_shape);
  s.Real("gamma_scale", d.gamma_scale);
  s.Real("R", d.R);
  s.Real("psi1", d.psi1);
  s.Real("psi2", d.psi2);
  auto kind = [](std::size_t i) {
    return VenueKindName(static_cast<VenueKind>(i));
  };
  s.Categories("rho", d.venue.rho, kind);
  s.Categories("q", d.venue.q, kind);
  Section attr = s.Sub("attr");
  attr.Categories("age", d.attr.age,
                  [](std::size_t i) { return AgeBandName(static_cast<int>(i)); });
  attr.Categories("sex", d.attr.sex,
                  [](std::size_t i) { return SexName(static_cast<Sex>(i)); });
  attr.Categories("ethnicity", d.attr.ethnicity, [](std::size_t i) {
    return EthnicityName(static_cast<Ethnicity>(i));
  });
  attr.Categories("vaccination", d.attr.vaccination, VaccinationName);
  attr.Done();
  s.Done();
}

void ReadSimulation(Section s, SimulationSettings& sim) {
  s.Integer("horizon_days", sim.horizon_days);
  s.ModeValue("mode", sim.mode);
  s.Real("temperature", sim.temperature);
  s.Real("gate_sharpness", sim.gate_sharpness);
  s.OptionalInteger("seed_count", sim.seed_count);
  s.String("seed_region", sim.seed_region);
  s.Done();
}

void ReadPolicies(Section s, PolicySet& p) {
  Section icc = s.Sub("icc");
  icc.Bool("enabled", p.icc.enabled);
  icc.Real("compliance_rate", p.icc.compliance_rate);
  icc.Integer("isolation_days", p.icc.isolation_days);
  icc.Integer("detection_delay_days", p.icc.detection_delay_days);
  icc.Real("detection_probability", p.icc.detection_probability);
  icc.Done();
  Section qec = s.Sub("qec");
  qec.Bool("enabled", p.qec.enabled);
  qec.Real("tracing_rate", p.qec.tracing_rate);
  qec.Integer("quarantine_days", p.qec.quarantine_days);
  qec.Done();
  Section sc = s.Sub("sc");
  sc.Bool("enabled", p.sc.enabled);
  sc.Integer("closure_days", p.sc.closure_days);
  sc.Done();
  Section vc = s.Sub("vc");
  vc.Bool("enabled", p.vc.enabled);
  vc.Real("daily_vaccination_rate", p.vc.daily_vaccination_rate);
  vc.Done();
  s.Done();
}

void ReadCalibration(Section s, CalibrationConfig& c) {
  s.Integer("iterations", c.iterations);
  s.Real("learning_rate", c.learning_rate);
  s.Real("momentum", c.momentum);
  s.Bool("normalize_loss", c.normalize_loss);
  s.Real("max_grad_norm", c.max_grad_norm);
  s.ModeValue("mode", c.mode);
  s.Real("temperature", c.temperature);
  s.Strings("fixed", c.fixed);
  s.Bool("use_modulator", c.use_modulator);
  s.Bool("train_modulator", c.train_modulator);
  s.Integer("hidden", c.hidden);
  s.Real("phi_max", c.phi_max);
  std::vector<double> weeks;
  s.Reals("week_range", weeks);
  if (!weeks.empty()) {
    if (weeks.size() != 2 || weeks[0] != std::floor(weeks[0]) ||
        weeks[1] != std::floor(weeks[1])) {
      s.Fail("week_range", "expected [first, last] week numbers");
    }
    c.week_range = {static_cast<int>(weeks[0]), static_cast<int>(weeks[1])};
  }
  s.Done();
}

void ReadEnsemble(Section s, EnsembleConfig& e) {
  s.Integer("n_members", e.n_members);
  s.Real("jitter", e.jitter);
  std::vector<double> range{e.compliance_lo, e.compliance_hi};
  s.Reals("compliance_range", range);
  if (range.size() != 2) s.Fail("compliance_range", "expected [lo, hi]");
  e.compliance_lo = range[0];
  e.compliance_hi = range[1];
  s.Bool("resample_seeds", e.resample_seeds);
  s.Integer("first_week", e.first_week);
  s.Done();
}

void ReadIo(Section s, IoPaths& io, const std::filesystem::path& base) {
  auto path = [&](const char* key, std::string& out) {
    std::string given;
    s.String(key, given);
    if (given.empty()) return;
    out = given;
    if (!base.empty() && std::filesystem::path(given).is_relative()) {
      out = (base / given).lexically_normal().string();
    }
  };
  path("population", io.population);
  path("observed", io.observed);
  path("fit", io.fit);
  path("ensemble", io.ensemble);
  path("output_dir", io.output_dir);
  s.Done();
}

std::string Quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string Num(double v) {
  std::string s = io::FormatReal(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename Range>
std::string NumList(const Range& r) {
  std::string out = "[";
  bool first = true;
  for (double v : r) {
    out += (first ? "" : ", ") + Num(v);
    first = false;
  }
  return out + "]";
}

std::string StrList(const std::vector<std::string>& r) {
  std::string out = "[";
  for (std::size_t i = 0; i < r.size(); ++i) {
    out += (i ? ", " : "") + Quote(r[i]);
  }
  return out + "]";
}

const char* ModeName(Mode m) { return m == Mode::kHard ? "hard" : "relaxed"; }

const char* Flag(bool b) { return b ? "true" : "false"; }

template <std::size_t N, typename NameFn>
void EmitCategories(std::ostringstream& out, const char* table,
                    const std::array<double, N>& values, NameFn name) {
  out << "\n[" << table << "]\n";
  for (std::size_t i = 0; i < N; ++i) {
    out << Quote(name(i)) << " = " << Num(values[i]) << "\n";
  }
}

}  // namespace

void RunConfig::SetSeed(std::uint64_t s) {
  seed = s;
  calibration.seed = s;
  ensemble.master_seed = s;
}

void RunConfig::Validate() const {
  population.Validate();
  try {
    disease.Validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("disease: ") + e.what());
  }
  policies.Validate();
  calibration.Validate();
  ensemble.Validate();
  if (simulation.horizon_days < 1) {
    throw ConfigError("simulation.horizon_days must be at least 1");
  }
  if (!(simulation.temperature > 0) || !(simulation.gate_sharpness > 0)) {
    throw ConfigError("simulation temperature and gate_sharpness must be positive");
  }
  if (simulation.seed_count && *simulation.seed_count < 0) {
    throw ConfigError("simulation.seed_count must be non-negative");
  }
}

RunConfig ParseConfig(const std::string& text, const std::string& name,
                      const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text, name);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << name << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  RunConfig c;
  Section top(&root, "");
  std::uint64_t seed = 0;
  top.Seed("seed", seed);
  ReadPopulation(top.Sub("population"), c.population);
  ReadDisease(top.Sub("disease"), c.disease);
  ReadSimulation(top.Sub("simulation"), c.simulation);
  ReadPolicies(top.Sub("policies"), c.policies);
  ReadCalibration(top.Sub("calibration"), c.calibration);
  ReadEnsemble(top.Sub("ensemble"), c.ensemble);
  ReadIo(top.Sub("io"), c.io, base_dir);
  top.Done();
  c.ensemble.horizon_days = c.simulation.horizon_days;
  c.ensemble.gate_sharpness = c.simulation.gate_sharpness;
  c.calibration.gate_sharpness = c.simulation.gate_sharpness;
  c.SetSeed(seed);
  c.Validate();
  return c;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str(), path.string(), path.parent_path());
}

std::string ConfigToToml(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << "\n";

  const PopulationSpec& p = c.population;
  out << "\n[population]\n"
      << "n_agents = " << p.n_agents << "\n"
      << "regions = " << StrList(p.regions) << "\n"
      << "household_size_weights = " << NumList(p.household_size_weights)
      << "\n"
      << "mean_household_size = " << Num(p.mean_household_size) << "\n"
      << "max_household_size = " << p.max_household_size << "\n"
      << "school_count = " << p.school_count << "\n"
      << "workplace_count = " << p.workplace_count << "\n"
      << "pub_count = " << p.pub_count << "\n"
      << "cinema_count = " << p.cinema_count << "\n"
      << "other_count = " << p.other_count << "\n"
      << "employment_fraction = " << Num(p.employment_fraction) << "\n"
      << "pub_fraction = " << Num(p.pub_fraction) << "\n"
      << "cinema_fraction = " << Num(p.cinema_fraction) << "\n"
      << "other_fraction = " << Num(p.other_fraction) << "\n"
      << "age_marginal = " << NumList(p.age_marginal) << "\n"
      << "sex_marginal = " << NumList(p.sex_marginal) << "\n"
      << "ethnicity_marginal = " << NumList(p.ethnicity_marginal) << "\n"
      << "vaccination_coverage = " << NumList(p.vaccination_coverage) << "\n";

  const DiseaseParams& d = c.disease;
  out << "\n[disease]\n"
      << "beta = " << Num(d.beta) << "\n"
      << "phi = " << Num(d.phi) << "\n"
      << "theta_ei = " << Num(d.theta_ei) << "\n"
      << "theta_ir = " << Num(d.theta_ir) << "\n"
      << "gamma_shape = " << Num(d.gamma_shape) << "\n"
      << "gamma_scale = " << Num(d.gamma_scale) << "\n"
      << "R = " << Num(d.R) << "\n"
      << "psi1 = " << Num(d.psi1) << "\n"
      << "psi2 = " << Num(d.psi2) << "\n";
  auto kind = [](std::size_t i) {
    return VenueKindName(static_cast<VenueKind>(i));
  };
  EmitCategories(out, "disease.rho", d.venue.rho, kind);
  EmitCategories(out, "disease.q", d.venue.q, kind);
  EmitCategories(out, "disease.attr.age", d.attr.age, [](std::size_t i) {
    return AgeBandName(static_cast<int>(i));
  });
  EmitCategories(out, "disease.attr.sex", d.attr.sex, [](std::size_t i) {
    return SexName(static_cast<Sex>(i));
  });
  EmitCategories(out, "disease.attr.ethnicity", d.attr.ethnicity,
                 [](std::size_t i) {
                   return EthnicityName(static_cast<Ethnicity>(i));
                 });
  EmitCategories(out, "disease.attr.vaccination", d.attr.vaccination,
                 VaccinationName);

  const SimulationSettings& s = c.simulation;
  out << "\n[simulation]\n"
      << "horizon_days = " << s.horizon_days << "\n"
      << "mode = " << Quote(ModeName(s.mode)) << "\n"
      << "temperature = " << Num(s.temperature) << "\n"
      << "gate_sharpness = " << Num(s.gate_sharpness) << "\n";
  if (s.seed_count) out << "seed_count = " << *s.seed_count << "\n";
  out << "seed_region = " << Quote(s.seed_region) << "\n";

  const PolicySet& ps = c.policies;
  out << "\n[policies.icc]\n"
      << "enabled = " << Flag(ps.icc.enabled) << "\n"
      << "compliance_rate = " << Num(ps.icc.compliance_rate) << "\n"
      << "isolation_days = " << ps.icc.isolation_days << "\n"
      << "detection_delay_days = " << ps.icc.detection_delay_days << "\n"
      << "detection_probability = " << Num(ps.icc.detection_probability)
      << "\n"
      << "\n[policies.qec]\n"
      << "enabled = " << Flag(ps.qec.enabled) << "\n"
      << "tracing_rate = " << Num(ps.qec.tracing_rate) << "\n"
      << "quarantine_days = " << ps.qec.quarantine_days << "\n"
      << "\n[policies.sc]\n"
      << "enabled = " << Flag(ps.sc.enabled) << "\n"
      << "closure_days = " << ps.sc.closure_days << "\n"
      << "\n[policies.vc]\n"
      << "enabled = " << Flag(ps.vc.enabled) << "\n"
      << "daily_vaccination_rate = " << Num(ps.vc.daily_vaccination_rate)
      << "\n";

  const CalibrationConfig& k = c.calibration;
  out << "\n[calibration]\n"
      << "iterations = " << k.iterations << "\n"
      << "learning_rate = " << Num(k.learning_rate) << "\n"
      << "momentum = " << Num(k.momentum) << "\n"
      << "normalize_loss = " << Flag(k.normalize_loss) << "\n"
      << "max_grad_norm = " << Num(k.max_grad_norm) << "\n"
      << "mode = " << Quote(ModeName(k.mode)) << "\n"
      << "temperature = " << Num(k.temperature) << "\n"
      << "fixed = " << StrList(k.fixed) << "\n"
      << "use_modulator = " << Flag(k.use_modulator) << "\n"
      << "train_modulator = " << Flag(k.train_modulator) << "\n"
      << "hidden = " << k.hidden << "\n"
      << "phi_max = " << Num(k.phi_max) << "\n";
  if (k.week_range) {
    out << "week_range = [" << k.week_range->first << ", "
        << k.week_range->second << "]\n";
  }

  const EnsembleConfig& e = c.ensemble;
  out << "\n[ensemble]\n"
      << "n_members = " << e.n_members << "\n"
      << "jitter = " << Num(e.jitter) << "\n"
      << "compliance_range = "
      << NumList(std::array<double, 2>{e.compliance_lo, e.compliance_hi})
      << "\n"
      << "resample_seeds = " << Flag(e.resample_seeds) << "\n"
      << "first_week = " << e.first_week << "\n";

  const IoPaths& io = c.io;
  out << "\n[io]\n"
      << "population = " << Quote(io.population) << "\n"
      << "observed = " << Quote(io.observed) << "\n"
      << "fit = " << Quote(io.fit) << "\n"
      << "ensemble = " << Quote(io.ensemble) << "\n"
      << "output_dir = " << Quote(io.output_dir) << "\n";
  return out.str();
}

std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ConfigHash(const RunConfig& config) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = Fnv1a64(ConfigToToml(config));
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 0xf];
  return out;
}

}  // namespace diffabm
