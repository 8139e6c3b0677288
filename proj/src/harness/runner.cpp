#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "ssflab/brownian.hpp"
#include "ssflab/harness.hpp"
#include "ssflab/ssf.hpp"

#ifndef SSFLAB_VERSION
#define SSFLAB_VERSION "0.0.0"
#endif

namespace ssflab {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void log_record(const ResultRecord& r, std::ostream& log) {
  for (const auto& c : r.checks)
    log << (c.passed ? "PASS " : "FAIL ") << (c.hard ? "[hard] " : "[soft] ") << c.name << "  value=" << format_double(c.value)
        << " threshold=" << format_double(c.threshold) << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
}

}  // namespace

std::string tool_version() { return SSFLAB_VERSION; }

int run_command(ExperimentKind kind, const std::optional<std::string>& config_path, const RunOptions& options,
                std::ostream& log) {
  namespace fs = std::filesystem;
  ExperimentConfig config;
  try {
    config = config_path ? load_config(*config_path, kind) : default_config(kind);
    if (options.seed) config.seed = *options.seed;
    if (options.workers < 1) throw ConfigError({"--workers: must be >= 1"});
  } catch (const ConfigError& e) {
    for (const auto& msg : e.errors()) log << "config error: " << msg << '\n';
    return exit_code::config_error;
  }

  const std::string name = to_string(kind);
  const fs::path dir(options.out_dir);
  RunManifest manifest;
  manifest.experiment = name;
  manifest.seed = config.seed;
  manifest.tool_version = tool_version();
  manifest.workers = options.workers;
  manifest.started = utc_now();

  auto emit = [&](const std::string& file, const std::string& contents) {
    write_file_atomic((dir / file).string(), contents);
    manifest.outputs.push_back(file);
  };
  auto finish = [&] {
    manifest.finished = utc_now();
    write_file_atomic((dir / "manifest.json").string(), manifest.to_json());
  };

  try {
    const std::string yaml = config_to_yaml(config);
    manifest.config_digest = sha256_hex(yaml);
    emit("config.yaml", yaml);
    log << name << ": seed " << config.seed << ", workers " << options.workers << ", digest " << manifest.config_digest << '\n';

    const ResultRecord record = run_experiment(config, Executor(options.workers));

    if (options.format == OutputFormat::csv) {
      for (std::size_t i = 0; i < record.tables.size(); ++i) {
        const Table& t = record.tables[i];
        emit(i == 0 ? name + ".csv" : name + "_" + t.name + ".csv", table_to_csv(t));
      }
    } else {
      emit(name + ".json", tables_to_json(record.tables));
    }
    emit(name + "_record.json", record_to_json(record, manifest.config_digest));
    emit(name + "_plot.dat", plot_data(record));
    emit(name + "_plot.gp", plot_script(record, name + "_plot.dat"));

    for (const auto& c : record.checks)
      if (!c.passed) ++(c.hard ? manifest.hard_failures : manifest.soft_failures);
    manifest.passed = record.passed();
    manifest.complete = true;
    finish();
    log_record(record, log);
    log << name << ": " << (manifest.passed ? "passed" : "FAILED") << " (" << manifest.hard_failures << " hard, "
        << manifest.soft_failures << " soft failures); outputs in " << dir.string() << '\n';
    return manifest.passed ? exit_code::ok : exit_code::check_failed;
  } catch (const std::exception& e) {
    manifest.error = e.what();
    log << name << ": error: " << e.what() << '\n';
    try {
      finish();
    } catch (const std::exception& e2) {
      log << name << ": could not write the manifest: " << e2.what() << '\n';
    }
    return exit_code::check_failed;
  }
}

// ---------------------------------------------------------------------------
// Selftest

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

Hamiltonian alloy_1d(int n, std::uint64_t realization) {
  const Grid g = build_grid(1, 1.0, {n});
  const AnchorLattice anchors{};
  const auto c = sample_couplings(DistributionSpec(Bernoulli{}), covering_window(g, anchors), 11, realization);
  return assemble_hamiltonian(g, assemble_potential(g, SingleSiteProfile::point(1, -1.0), c, anchors, Cutoff::none()));
}

Outcome philox_kat() {
  const bool ok = Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
                      Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8} &&
                  Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
                      Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1};
  return {ok, "Philox4x32-10 known answers"};
}

Outcome counting_vs_dense() {
  const Grid g = build_grid(2, 1.0, {6, 7});
  const AnchorLattice anchors{};
  const auto c = sample_couplings(DistributionSpec(Uniform{-1.0, 1.0}), covering_window(g, anchors), 3, 0);
  const auto h = assemble_hamiltonian(g, assemble_potential(g, SingleSiteProfile::point(2, 2.0), c, anchors, Cutoff::none()));
  const Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h.matrix.to_dense(), Eigen::EigenvaluesOnly).eigenvalues();
  int mismatches = 0, probes = 0;
  for (double l = -2.9; l < 10.0; l += 0.37) {
    if (!is_off_spectrum(h.matrix, l, spectral_margin(h.matrix))) continue;
    long oracle = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) oracle += ev[i] < l;
    mismatches += count_below(h.matrix, l) != oracle;
    ++probes;
  }
  return {mismatches == 0 && probes > 20, std::to_string(probes) + " energies, " + std::to_string(mismatches) + " mismatches"};
}

Outcome birman_krein() {
  const auto h = alloy_1d(120, 0);
  const auto h0 = free_hamiltonian(h.grid);
  const auto r = birman_krein_residual(h.matrix, h0.matrix, SpectralFunction::bump(-0.5, 2.5));
  return {std::abs(r.residual) <= r.tolerance, "residual " + format_double(r.residual)};
}

Outcome laplace_identity() {
  const auto h = alloy_1d(100, 1);
  const auto h0 = free_hamiltonian(h.grid);
  double worst = 0.0;
  for (double t : {0.5, 1.0, 2.0}) worst = std::max(worst, laplace_functional(h.matrix, h0.matrix, t).relative_difference);
  return {worst <= 1e-8, "max relative difference " + format_double(worst)};
}

Outcome sign_split() {
  const Grid g = build_grid(1, 1.0, {80});
  const AnchorLattice anchors{};
  const auto c = sample_couplings(DistributionSpec(Uniform{-1.0, 1.0}), covering_window(g, anchors), 5, 0);
  const auto [cp, cm] = split_signs(c);
  const auto prof = SingleSiteProfile::point(1, 1.0);
  const auto h0 = free_hamiltonian(g);
  const auto hv = assemble_hamiltonian(g, assemble_potential(g, prof, c, anchors, Cutoff::none()));
  const auto hp = assemble_hamiltonian(g, assemble_potential(g, prof, cp, anchors, Cutoff::none()));
  const SymmetricBandMatrix* ops[] = {&h0.matrix, &hv.matrix, &hp.matrix};
  const auto grid = off_spectrum_grid(-1.5, 5.5, 30, ops);
  // xi(H0+V, H0) = xi(H0+V+, H0) + xi(H0+V, H0+V+)
  const auto total = ssf_counting(hv.matrix, h0.matrix, grid.lambdas).xi;
  const auto plus = ssf_counting(hp.matrix, h0.matrix, grid.lambdas).xi;
  const auto minus = ssf_counting(hv.matrix, hp.matrix, grid.lambdas).xi;
  bool ok = true;
  for (std::size_t i = 0; i < total.size(); ++i) ok = ok && total[i] == plus[i] + minus[i] && plus[i] >= 0 && minus[i] <= 0;
  return {ok, "chain rule and signs at 30 energies"};
}

Outcome heat_kernel() {
  const auto h = alloy_1d(60, 2);
  const double direct = heat_trace(h.matrix, 1.0);
  const double via_matrix = heat_semigroup(h.matrix, 1.0).trace();
  const double rel = std::abs(direct - via_matrix) / std::abs(direct);
  return {rel < 1e-10, "relative difference " + format_double(rel)};
}

Outcome small_brownian() {
  HittingOptions opt;
  opt.paths = 20000;
  opt.seed = 9;
  const RegionSpec region(1, HalfSpace{0, 1.0, true});
  const auto e = simulate_hitting({0.0}, region, 1.0, opt);
  const double exact = std::erfc(1.0 / 2.0);
  const double z = std::abs(e.estimate - exact) / std::max(e.standard_error, 1e-12);
  return {z <= 4.0 && e.estimate <= gaussian_bound({0.0}, region, 1.0), "z-score " + format_double(z)};
}

Outcome config_round_trip() {
  for (const auto& name : experiment_names()) {
    const auto kind = *experiment_from_string(name);
    const std::string yaml = config_to_yaml(default_config(kind));
    const std::string again = config_to_yaml(parse_config(yaml));
    if (sha256_hex(yaml) != sha256_hex(again)) return {false, name + " digest changed after a round trip"};
  }
  return {true, "all default configs"};
}

Outcome determinism(unsigned workers) {
  ExperimentConfig c = default_config(ExperimentKind::bulk_limit);
  c.schedule = {16, 32};
  c.realizations = 6;
  c.params["doubling_realizations"] = 2;
  const auto a = run_experiment(c, Executor(1));
  const auto b = run_experiment(c, Executor(std::max(2u, workers)));
  bool same = a.tables.size() == b.tables.size();
  for (std::size_t i = 0; same && i < a.tables.size(); ++i) same = table_to_csv(a.tables[i]) == table_to_csv(b.tables[i]);
  return {same, "bulk-limit tables, workers 1 vs " + std::to_string(std::max(2u, workers))};
}

}  // namespace

int selftest(std::ostream& log, unsigned workers) {
  const std::pair<const char*, std::function<Outcome()>> suites[] = {
      {"random field: Philox known answers", philox_kat},
      {"spectral: counting matches dense eigenvalues", counting_vs_dense},
      {"ssf: Birman-Krein residual", birman_krein},
      {"ssf: Laplace identity", laplace_identity},
      {"ssf: sign split chain rule", sign_split},
      {"spectral: heat trace vs semigroup", heat_kernel},
      {"brownian: half-line hitting", small_brownian},
      {"harness: config round trip", config_round_trip},
      {"harness: determinism across workers", [workers] { return determinism(workers); }},
  };
  int failures = 0;
  for (const auto& [name, suite] : suites) {
    Outcome o;
    try {
      o = suite();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.ok;
    log << (o.ok ? "PASS " : "FAIL ") << name << "  (" << o.detail << ")\n";
  }
  log << "selftest: " << (failures == 0 ? "healthy" : std::to_string(failures) + " suite(s) failed") << '\n';
  return failures == 0 ? exit_code::ok : exit_code::check_failed;
}

}  // namespace ssflab
