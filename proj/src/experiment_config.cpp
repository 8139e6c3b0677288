#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssflab/experiments.hpp"

namespace ssflab {

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names = {
      {ExperimentKind::bulk_limit, "bulk-limit"}, {ExperimentKind::locality, "locality"},
      {ExperimentKind::cutoff, "cutoff"},         {ExperimentKind::cluster, "cluster"},
      {ExperimentKind::subadditive, "subadditive"}, {ExperimentKind::surface, "surface"},
      {ExperimentKind::kirsch, "kirsch"},         {ExperimentKind::resolvent, "resolvent"},
      {ExperimentKind::brownian, "brownian"}};
  return names;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kind_names())
    if (k == kind) return name;
  return "?";
}

std::optional<ExperimentKind> experiment_from_string(const std::string& name) {
  for (const auto& [k, n] : kind_names()) {
    if (n == name) return k;
    std::string underscored = n;
    std::replace(underscored.begin(), underscored.end(), '-', '_');
    if (underscored == name) return k;
  }
  return std::nullopt;
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& kv : kind_names()) out.push_back(kv.second);
  return out;
}

SpectralFunction FunctionSpec::make() const {
  switch (kind) {
    case SpectralFunction::Kind::bump:
      return SpectralFunction::bump(a, b);
    case SpectralFunction::Kind::exponential:
      return SpectralFunction::exponential(t);
    case SpectralFunction::Kind::resolvent_power:
      return SpectralFunction::resolvent_power(a, static_cast<int>(b));
    case SpectralFunction::Kind::constant:
      return SpectralFunction::constant(a);
  }
  throw std::invalid_argument("function: unknown kind");
}

double ExperimentConfig::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw std::out_of_range("params." + key + ": not set for " + to_string(kind));
  return it->second;
}

double ExperimentConfig::tolerance(const std::string& key) const {
  auto it = tolerances.find(key);
  if (it == tolerances.end()) throw std::out_of_range("tolerances." + key + ": not set for " + to_string(kind));
  return it->second;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.seed = 1;
  switch (kind) {
    case ExperimentKind::bulk_limit:
      c.grid.dimension = 1;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::point, -1.0, 1, 2.0};
      c.schedule = {128, 256, 512, 1024};
      c.energies = {-0.5};
      c.realizations = 48;
      c.params = {{"doubling_realizations", 4}};
      c.tolerances = {{"deviation", 0.02}, {"variance_slack", 1.2}, {"ambient_shift", 1e-3}, {"seed_block_sigma", 3.0}};
      break;
    case ExperimentKind::locality:
      c.grid.dimension = 2;
      c.grid.margin = 8;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::point, -1.0, 1, 2.0};
      // lower band edge, where the wells move spectral weight
      c.function = {SpectralFunction::Kind::bump, -1.5, 0.5, 1.0};
      c.schedule = {8, 16, 32};
      c.realizations = 6;
      c.params = {{"dense_limit", 4000}};
      c.tolerances = {{"slope_low", -1.3}, {"slope_high", -0.7}};
      break;
    case ExperimentKind::cutoff:
      c.grid.dimension = 1;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::exponential, -1.0, 1, 2.0};
      c.function = {SpectralFunction::Kind::bump, -1.0, 2.0, 1.0};
      c.schedule = {32, 64, 128, 256};
      c.realizations = 32;
      c.params = {{"rate_scan", 1}};
      c.tolerances = {};
      break;
    case ExperimentKind::cluster:
      c.grid.dimension = 2;
      c.grid.transverse = 16;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::point, 1.0, 1, 2.0};
      c.schedule = {8, 16, 32};
      c.times = {1.0, 4.0, 16.0};
      c.realizations = 4;
      c.params = {{"dense_limit", 4000},
                  {"additivity_sites", 160},
                  {"additivity_instances", 8},
                  {"additivity_energies", 80}};
      c.tolerances = {{"slope_low", 0.7}, {"slope_high", 1.3}, {"additivity_bound", 1.1}};
      break;
    case ExperimentKind::subadditive:
      c.grid.dimension = 2;
      c.grid.margin = 4;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::point, 1.0, 1, 2.0};
      c.schedule = {16, 32, 64};
      c.times = {1.0};
      c.realizations = 4;
      c.params = {};
      c.tolerances = {{"safety_factor", 1.5}, {"variance_slack", 1.2}};
      break;
    case ExperimentKind::surface:
      c.grid.dimension = 2;
      c.grid.transverse = 16;
      c.grid.margin = 8;
      c.distribution = DistributionSpec(Uniform{-0.5, 1.0});
      c.profile = {ProfileSpec::Kind::point, -3.0, 1, 2.0};
      c.schedule = {64, 128, 256, 512};
      c.energies = {-1.0, -0.5};
      c.times = {0.5, 1.0, 2.0};
      c.realizations = 256;
      c.params = {{"criterion_energy", -0.5},
                  {"split_energies", 24},
                  {"split_realizations", 4},
                  {"laplace_realizations", 2},
                  {"transverse_realizations", 16}};
      c.tolerances = {{"relative_change", 0.05}, {"transverse_shift", 0.01}};
      break;
    case ExperimentKind::kirsch:
      c.grid.dimension = 2;
      c.profile = {ProfileSpec::Kind::cell, 4.0, 2, 2.0};
      c.schedule = {8, 16, 32, 64};
      c.times = {0.5, 1.0, 2.0};
      c.realizations = 1;
      c.params = {{"energy_count", 80}, {"energy_low", 0.05}, {"energy_high", 7.95}};
      c.tolerances = {{"growth", 2.0}, {"dual_relative", 1e-8}};
      break;
    case ExperimentKind::resolvent:
      c.grid.dimension = 2;
      c.grid.transverse = 16;
      c.distribution = DistributionSpec(Bernoulli{0.5, 0.0, 1.0});
      c.profile = {ProfileSpec::Kind::point, 1.0, 1, 2.0};
      c.schedule = {8, 16, 32};
      c.energies = {1.0, 2.0, 4.0};
      c.realizations = 4;
      c.params = {{"power", 2}, {"dense_limit", 4000}};
      c.tolerances = {{"slope_low", 0.7}, {"slope_high", 1.3}, {"spectral_gap", 0.5}};
      break;
    case ExperimentKind::brownian:
      c.grid.dimension = 2;
      c.distances = {0.5, 1.0, 2.0};
      c.times = {0.25, 1.0};
      c.realizations = 1;
      c.params = {{"paths", 100000}, {"steps", 512}, {"joint_paths", 20000}, {"joint_eps", 1.0}};
      c.tolerances = {{"sigma", 3.0}};
      break;
  }
  return c;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto err = [&](const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); };

  if (c.grid.dimension < 1 || c.grid.dimension > 3) err("grid.dimension", "must be 1, 2 or 3");
  if (!(c.grid.spacing > 0.0) || !std::isfinite(c.grid.spacing)) err("grid.spacing", "must be positive");
  if (c.grid.margin < 0) err("grid.margin", "must be non-negative");
  if (c.grid.ambient_factor < 4) err("grid.ambient_factor", "must be at least 4");
  if (c.grid.transverse < 2 || c.grid.transverse % 2 != 0) err("grid.transverse", "must be an even number >= 2");

  try {
    validate(c.distribution);
  } catch (const std::invalid_argument& e) {
    err("distribution", e.what());
  }
  if (!std::isfinite(c.profile.depth)) err("profile.depth", "must be finite");
  if (c.profile.width < 1) err("profile.width", "must be >= 1");
  if (!(c.profile.rate > 0.0) || !std::isfinite(c.profile.rate)) err("profile.rate", "must be positive");

  if (c.function.kind == SpectralFunction::Kind::bump && !(c.function.a < c.function.b))
    err("function", "bump needs a < b");
  if (c.function.kind == SpectralFunction::Kind::exponential && !(c.function.t > 0.0))
    err("function.t", "must be positive");

  if (c.realizations < 1) err("realizations", "must be >= 1");
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    if (c.schedule[i] < 1) err("schedule", "box sizes must be positive");
    if (i > 0 && c.schedule[i] <= c.schedule[i - 1]) {
      err("schedule", "must be strictly increasing");
      break;
    }
  }
  if (!strictly_increasing(c.energies)) err("energies", "must be strictly increasing");
  if (!strictly_increasing(c.times)) err("times", "must be strictly increasing");
  for (double t : c.times)
    if (!(t > 0.0)) err("times", "must be positive");
  for (const auto& [k, v] : c.tolerances)
    if (!std::isfinite(v)) err("tolerances." + k, "must be finite");
  for (const auto& [k, v] : c.params)
    if (!std::isfinite(v)) err("params." + k, "must be finite");

  const ExperimentConfig defaults = default_config(c.kind);
  for (const auto& [k, v] : c.params)
    if (!defaults.params.count(k)) err("params." + k, "unknown key for " + to_string(c.kind));
  for (const auto& [k, v] : c.tolerances)
    if (!defaults.tolerances.count(k)) err("tolerances." + k, "unknown key for " + to_string(c.kind));

  const bool needs_schedule = c.kind != ExperimentKind::brownian;
  if (needs_schedule && c.schedule.empty()) err("schedule", "must not be empty");
  auto require_dimension = [&](int d) {
    if (c.grid.dimension != d) err("grid.dimension", "must be " + std::to_string(d) + " for " + to_string(c.kind));
  };
  auto even_schedule = [&] {
    for (int s : c.schedule)
      if (s % 2 != 0) {
        err("schedule", "box sizes must be even (the box is split in halves)");
        break;
      }
  };

  switch (c.kind) {
    case ExperimentKind::bulk_limit:
      if (c.grid.dimension > 2) err("grid.dimension", "bulk-limit supports 1 or 2");
      if (c.energies.empty()) err("energies", "must not be empty");
      for (double l : c.energies)
        if (!(l < 0.0)) {
          err("energies", "must lie below 0 (the bottom of the free spectrum)");
          break;
        }
      break;
    case ExperimentKind::locality:
      require_dimension(2);
      if (c.function.kind != SpectralFunction::Kind::bump) err("function", "locality needs a bump");
      break;
    case ExperimentKind::cutoff:
      if (c.grid.dimension > 2) err("grid.dimension", "cutoff supports 1 or 2");
      break;
    case ExperimentKind::cluster:
      require_dimension(2);
      if (c.times.empty()) err("times", "must not be empty");
      if (c.params.count("additivity_sites") && c.params.at("additivity_sites") < 16)
        err("params.additivity_sites", "must be >= 16");
      break;
    case ExperimentKind::subadditive:
      require_dimension(2);
      even_schedule();
      if (c.times.empty()) err("times", "must not be empty");
      break;
    case ExperimentKind::surface:
      require_dimension(2);
      if (c.energies.empty()) err("energies", "must not be empty");
      for (double l : c.energies)
        if (!(l < 0.0)) {
          err("energies", "must lie below 0");
          break;
        }
      if (c.grid.transverse < 8 * c.profile.width) err("grid.transverse", "must be >= 8 x profile.width");
      if (c.params.count("criterion_energy") &&
          std::find(c.energies.begin(), c.energies.end(), c.params.at("criterion_energy")) == c.energies.end())
        err("params.criterion_energy", "must be one of the energies");
      break;
    case ExperimentKind::kirsch:
      require_dimension(2);
      if (c.profile.depth < 0.0) err("profile.depth", "kirsch needs V >= 0");
      if (c.times.empty()) err("times", "must not be empty");
      for (int s : c.schedule)
        if (s < c.profile.width) {
          err("schedule", "boxes must hold the central cell");
          break;
        }
      break;
    case ExperimentKind::resolvent:
      require_dimension(2);
      if (c.energies.empty()) err("energies", "must hold the shifts E");
      if (c.params.count("power") && c.params.at("power") < 1) err("params.power", "must be >= 1");
      break;
    case ExperimentKind::brownian:
      if (c.distances.empty()) err("distances", "must not be empty");
      for (double d : c.distances)
        if (!(d > 0.0)) {
          err("distances", "must be positive");
          break;
        }
      if (c.times.empty()) err("times", "must not be empty");
      if (c.params.count("paths") && c.params.at("paths") < 1000) err("params.paths", "must be >= 1000");
      if (c.params.count("joint_paths") && c.params.at("joint_paths") < 1000)
        err("params.joint_paths", "must be >= 1000");
      if (c.params.count("steps") && c.params.at("steps") < 10) err("params.steps", "must be >= 10");
      break;
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Results

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::logic_error("table " + name + ": row width differs from header");
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& key) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == key) return i;
  throw std::out_of_range("table " + name + ": no column " + key);
}

bool ResultRecord::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return !c.hard || c.passed; });
}

const Check* ResultRecord::find_check(const std::string& key) const {
  for (const auto& c : checks)
    if (c.name == key) return &c;
  return nullptr;
}

const Table* ResultRecord::find_table(const std::string& key) const {
  for (const auto& t : tables)
    if (t.name == key) return &t;
  return nullptr;
}

void ResultRecord::check(std::string name, bool ok, double value, double threshold, std::string detail, bool hard) {
  checks.push_back({std::move(name), hard, ok, value, threshold, std::move(detail)});
}

ResultRecord run_experiment(const ExperimentConfig& config, const Executor& executor) {
  switch (config.kind) {
    case ExperimentKind::bulk_limit:
      return run_bulk_limit(config, executor);
    case ExperimentKind::locality:
      return run_locality(config, executor);
    case ExperimentKind::cutoff:
      return run_cutoff_equivalence(config, executor);
    case ExperimentKind::cluster:
      return run_cluster(config, executor);
    case ExperimentKind::subadditive:
      return run_subadditive(config, executor);
    case ExperimentKind::surface:
      return run_surface(config, executor);
    case ExperimentKind::kirsch:
      return run_kirsch_demo(config, executor);
    case ExperimentKind::resolvent:
      return run_resolvent_power(config, executor);
    case ExperimentKind::brownian:
      return run_brownian(config, executor);
  }
  throw std::invalid_argument("unknown experiment");
}

}  // namespace ssflab
