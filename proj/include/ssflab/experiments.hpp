#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssflab/model.hpp"
#include "ssflab/parallel.hpp"
#include "ssflab/random_field.hpp"
#include "ssflab/spectral.hpp"

namespace ssflab {

// ---------------------------------------------------------------------------
// Configuration

struct GridSpec {
  int dimension = 1;
  double spacing = 1.0;
  // Sites added on every side of the largest box (locality, subadditive, surface).
  int margin = 8;
  // Ambient extent as a multiple of the largest box (bulk limit, cutoff).
  int ambient_factor = 4;
  // Transverse extent in sites (cluster, resolvent, surface).
  int transverse = 16;
};

struct ProfileSpec {
  enum class Kind { point, cell, exponential };
  Kind kind = Kind::point;
  double depth = -1.0;
  int width = 1;      // cell profiles
  double rate = 2.0;  // exponential profiles, per unit length
};

struct FunctionSpec {
  SpectralFunction::Kind kind = SpectralFunction::Kind::bump;
  double a = 0.5;
  double b = 3.5;
  double t = 1.0;

  SpectralFunction make() const;
};

enum class ExperimentKind { bulk_limit, locality, cutoff, cluster, subadditive, surface, kirsch, resolvent, brownian };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_from_string(const std::string& name);
std::vector<std::string> experiment_names();

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::bulk_limit;
  GridSpec grid;
  DistributionSpec distribution;
  ProfileSpec profile;
  FunctionSpec function;
  std::vector<int> schedule;
  std::vector<double> energies;
  std::vector<double> times;
  std::vector<double> distances;  // brownian only
  std::size_t realizations = 20;
  std::uint64_t seed = 1;
  // Experiment-specific numeric knobs and tolerances; the defaults of an experiment
  // define which keys exist.
  std::map<std::string, double> params;
  std::map<std::string, double> tolerances;

  double param(const std::string& key) const;
  double tolerance(const std::string& key) const;
};

// Defaults for every experiment; these are the desk-scale acceptance configurations.
ExperimentConfig default_config(ExperimentKind kind);

// Every violated constraint, as "key.path: message".
std::vector<std::string> validate_config(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Results

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  std::size_t column(const std::string& name) const;
};

struct Check {
  std::string name;
  bool hard = true;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct FitRecord {
  std::string name;
  LinearFit fit;
  double expected_low = 0.0;
  double expected_high = 0.0;
};

struct Series {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

struct ResultRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<Table> tables;  // the first table holds the raw rows
  std::vector<FitRecord> fits;
  std::vector<Check> checks;
  std::vector<Series> series;
  std::map<std::string, double> values;  // named scalars (calibration constants, ...)
  std::vector<std::string> warnings;

  bool passed() const;
  const Check* find_check(const std::string& name) const;
  const Table* find_table(const std::string& name) const;
  void check(std::string name, bool passed, double value, double threshold, std::string detail = {}, bool hard = true);
};

// ---------------------------------------------------------------------------
// Campaigns

ResultRecord run_bulk_limit(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_locality(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_cutoff_equivalence(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_cluster(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_subadditive(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_surface(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_kirsch_demo(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_resolvent_power(const ExperimentConfig& config, const Executor& executor);
ResultRecord run_brownian(const ExperimentConfig& config, const Executor& executor);

ResultRecord run_experiment(const ExperimentConfig& config, const Executor& executor);

// Trace norm of exp(-t(H0+V)) - exp(-t(H0+chi_1 V)) - exp(-t(H0+chi_2 V)) + exp(-t H0).
double cluster_four_term_norm(const Grid& grid, const PotentialField& v, const SiteBox& part1, const SiteBox& part2,
                              double t, const SpectralLimits& limits = {});

// Shared building blocks.
SingleSiteProfile make_profile(const ProfileSpec& spec, int dimension, double spacing);
// Box of `extent` sites per axis centred in the grid.
SiteBox centred_box(const Grid& grid, int extent);
// Anchors at every site with lattice coordinate 0 at the grid centre, so nested and
// enlarged grids see the same couplings at the same relative positions.
AnchorLattice centred_anchors(const Grid& grid);

}  // namespace ssflab
