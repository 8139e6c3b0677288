#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "ssflab/harness.hpp"

using namespace ssflab;
namespace fs = std::filesystem;

namespace {

bool mentions(const ConfigError& e, const std::string& key) {
  return std::any_of(e.errors().begin(), e.errors().end(),
                     [&](const std::string& m) { return m.rfind(key + ":", 0) == 0; });
}

std::vector<std::string> errors_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ssflab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmallBulk = R"(experiment: bulk-limit
schedule: [16, 32]
realizations: 6
seed: 5
params:
  doubling_realizations: 2
)";

}  // namespace

TEST_CASE("minimal bulk-limit config echoes defaults") {
  const auto c = parse_config("experiment: bulk-limit\nschedule: [64, 128]\n");
  CHECK(c.kind == ExperimentKind::bulk_limit);
  CHECK(c.schedule == std::vector<int>{64, 128});
  CHECK(c.tolerance("deviation") == 0.02);
  CHECK(c.tolerance("variance_slack") == 1.2);
  CHECK(c.grid.dimension == 1);
  CHECK(c.energies == std::vector<double>{-0.5});
}

TEST_CASE("validation errors name their key paths") {
  try {
    parse_config("experiment: bulk-limit\ngrid: {spacing: -1}\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "grid.spacing"));
  }
  try {
    parse_config("experiment: bulk-limit\nschedule: [64, 32]\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "schedule"));
  }
}

TEST_CASE("every violated constraint is reported") {
  const auto errs = errors_of(
      "experiment: locality\ngrid: {spacing: 0, colour: red}\nschedule: [8, 8]\nrealizations: 0\n"
      "tolerances: {slope_lo: 1}\nbogus: 1\n");
  auto has = [&](const std::string& k) {
    return std::any_of(errs.begin(), errs.end(), [&](const std::string& m) { return m.rfind(k + ":", 0) == 0; });
  };
  CHECK(has("grid.spacing"));
  CHECK(has("grid.colour"));
  CHECK(has("schedule"));
  CHECK(has("realizations"));
  CHECK(has("tolerances.slope_lo"));
  CHECK(has("bogus"));
}

TEST_CASE("type errors and experiment mismatches") {
  CHECK(!errors_of("experiment: bulk-limit\nrealizations: many\n").empty());
  CHECK(!errors_of("experiment: nothing\n").empty());
  CHECK(!errors_of("schedule: [1, 2]\n").empty());  // no experiment
  CHECK_THROWS_AS(parse_config("experiment: cutoff\n", ExperimentKind::locality), ConfigError);
  CHECK(parse_config("schedule: [8, 16]\n", ExperimentKind::locality).kind == ExperimentKind::locality);
  CHECK(parse_config("experiment: bulk_limit\n").kind == ExperimentKind::bulk_limit);
  CHECK(!errors_of("experiment: bulk-limit\ndistribution: {kind: uniform, a: 2, b: 1}\n").empty());
  CHECK(!errors_of("experiment: [unterminated\n").empty());
}

TEST_CASE("canonical yaml round-trips with a stable digest") {
  for (const auto& name : experiment_names()) {
    const auto c = default_config(*experiment_from_string(name));
    const std::string yaml = config_to_yaml(c);
    const auto back = parse_config(yaml);
    CHECK(config_to_yaml(back) == yaml);
    CHECK(back.schedule == c.schedule);
    CHECK(back.params == c.params);
  }
  ExperimentConfig c = default_config(ExperimentKind::bulk_limit);
  c.energies = {-0.30000000000000004};
  CHECK(parse_config(config_to_yaml(c)).energies[0] == -0.30000000000000004);
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("csv and json tables carry the same values") {
  Table t;
  t.name = "raw";
  t.columns = {"L", "value", "label"};
  t.add({8LL, 0.1, std::string("a,\"b\"")});
  t.add({16LL, -INFINITY, std::string("12")});
  t.add({32LL, 1e-300, std::string("")});
  t.add({-4LL, std::nan(""), std::string("nan")});
  const auto from_csv = table_from_csv("raw", table_to_csv(t));
  CHECK(same_values(t, from_csv));
  CHECK(std::get<std::string>(from_csv.rows[1][2]) == "12");
  const auto from_json = tables_from_json(tables_to_json({t}));
  REQUIRE(from_json.size() == 1);
  CHECK(same_values(from_csv, from_json[0]));
  Table other = t;
  other.rows[0][1] = 0.1 + 1e-16;
  CHECK_FALSE(same_values(t, other));
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("plot data is gnuplot-indexed") {
  ResultRecord r;
  r.experiment = "demo";
  r.series.push_back({"a", "L", "y", {{1, 2}, {2, 4}}});
  r.series.push_back({"b", "L", "y", {{1, -1}}});
  const std::string d = plot_data(r);
  CHECK(d.find("\n\n\n# b") != std::string::npos);
  CHECK(plot_script(r, "demo.dat").find("index 1") != std::string::npos);
}

TEST_CASE("run_command writes deterministic, self-describing outputs") {
  const fs::path dir = scratch("run");
  const fs::path cfg = dir / "small.yaml";
  std::ofstream(cfg) << kSmallBulk;
  std::ostringstream log;
  RunOptions one{std::nullopt, (dir / "w1").string(), 1, OutputFormat::csv};
  RunOptions four{std::nullopt, (dir / "w4").string(), 4, OutputFormat::csv};
  RunOptions js{std::nullopt, (dir / "json").string(), 2, OutputFormat::json};
  CHECK(run_command(ExperimentKind::bulk_limit, cfg.string(), one, log) == exit_code::ok);
  CHECK(run_command(ExperimentKind::bulk_limit, cfg.string(), four, log) == exit_code::ok);
  CHECK(run_command(ExperimentKind::bulk_limit, cfg.string(), js, log) == exit_code::ok);

  for (const auto& f : fs::directory_iterator(dir / "w1"))
    if (f.path().extension() == ".csv") CHECK(slurp(f.path()) == slurp(dir / "w4" / f.path().filename()));

  const auto manifest = nlohmann::json::parse(slurp(dir / "w1" / "manifest.json"));
  CHECK(manifest["complete"].get<bool>());
  CHECK(manifest["config_digest"].get<std::string>() == sha256_hex(slurp(dir / "w1" / "config.yaml")));
  CHECK(manifest["seed"].get<std::uint64_t>() == 5);

  const auto tables = tables_from_json(slurp(dir / "json" / "bulk-limit.json"));
  REQUIRE(!tables.empty());
  CHECK(same_values(tables[0], table_from_csv(tables[0].name, slurp(dir / "w1" / "bulk-limit.csv"))));
  for (std::size_t i = 1; i < tables.size(); ++i)
    CHECK(same_values(tables[i],
                      table_from_csv(tables[i].name, slurp(dir / "w1" / ("bulk-limit_" + tables[i].name + ".csv")))));

  const auto record = nlohmann::json::parse(slurp(dir / "w1" / "bulk-limit_record.json"));
  CHECK(record["schema"] == "ssflab.result/1");
  CHECK(record["config_digest"] == manifest["config_digest"]);
}

TEST_CASE("seed override and config errors") {
  const fs::path dir = scratch("errors");
  const fs::path cfg = dir / "small.yaml";
  std::ofstream(cfg) << kSmallBulk;
  std::ostringstream log;
  RunOptions opt{std::uint64_t{9}, (dir / "out").string(), 1, OutputFormat::csv};
  CHECK(run_command(ExperimentKind::bulk_limit, cfg.string(), opt, log) == exit_code::ok);
  CHECK(parse_config(slurp(dir / "out" / "config.yaml")).seed == 9);

  const fs::path bad = dir / "bad.yaml";
  std::ofstream(bad) << "experiment: bulk-limit\ngrid: {spacing: -2}\n";
  std::ostringstream log2;
  CHECK(run_command(ExperimentKind::bulk_limit, bad.string(), opt, log2) == exit_code::config_error);
  CHECK(log2.str().find("grid.spacing") != std::string::npos);
  CHECK(run_command(ExperimentKind::cutoff, cfg.string(), opt, log2) == exit_code::config_error);
}

TEST_CASE("atomic writes replace files whole") {
  const fs::path dir = scratch("atomic");
  const std::string p = (dir / "nested" / "f.txt").string();
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  CHECK(slurp(p) == "two");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "nested")) ++entries;
  CHECK(entries == 1);
}
