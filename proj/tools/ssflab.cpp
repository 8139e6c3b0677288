// ssflab command line: one subcommand per experiment plus `selftest`.
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "ssflab/harness.hpp"
#include "ssflab/spectral.hpp"

int main(int argc, char** argv) {
  ssflab::relaunch_with_portable_blas(argv);

  CLI::App app{"Spectral shift function experiments for random alloy models"};
  app.set_version_flag("--version", ssflab::tool_version());
  app.require_subcommand(1);

  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = "ssflab-out";
  unsigned workers = 1;
  ssflab::OutputFormat format = ssflab::OutputFormat::csv;
  const std::map<std::string, ssflab::OutputFormat> formats{{"csv", ssflab::OutputFormat::csv},
                                                             {"json", ssflab::OutputFormat::json}};

  std::map<CLI::App*, ssflab::ExperimentKind> experiments;
  for (const auto& name : ssflab::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("config", config, "YAML configuration (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--format", format, "table format")->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
    experiments[sub] = *ssflab::experiment_from_string(name);
  }
  auto* self = app.add_subcommand("selftest", "run the reduced invariant suites");
  self->add_option("--workers", workers, "worker threads for the determinism suite")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ssflab::exit_code::config_error;
  }

  if (self->parsed()) return ssflab::selftest(std::cout, workers);
  for (const auto& [sub, kind] : experiments)
    if (sub->parsed()) return ssflab::run_command(kind, config, {seed, out, workers, format}, std::cout);
  return ssflab::exit_code::config_error;
}
