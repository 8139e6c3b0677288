#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssflab/experiments.hpp"

namespace ssflab {

// Every violated constraint of a configuration, each prefixed by its key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

// YAML text in the documented grammar (docs/config.md). Omitted keys take the defaults
// of the experiment. `expected` fills in a missing `experiment` key and must agree with
// it when both are present.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> expected = std::nullopt);

// Canonical YAML rendering with every key spelled out; parse_config inverts it.
std::string config_to_yaml(const ExperimentConfig& config);

std::string sha256_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// Serialization

// Doubles use 17 significant digits; non-finite values are written inf, -inf, nan.
std::string format_double(double v);
std::string table_to_csv(const Table& table);
Table table_from_csv(const std::string& name, const std::string& text);
std::string tables_to_json(const std::vector<Table>& tables);
std::vector<Table> tables_from_json(const std::string& text);
// Values compared after a CSV or JSON round trip; integer and double cells compare by value.
bool same_values(const Table& a, const Table& b);

std::string record_to_json(const ResultRecord& record, const std::string& config_digest);

// Two-column blocks separated by blank lines (gnuplot `index`), plus a plotting stub.
std::string plot_data(const ResultRecord& record);
std::string plot_script(const ResultRecord& record, const std::string& data_file);

struct RunManifest {
  std::string experiment;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started;
  std::string finished;
  unsigned workers = 1;
  std::vector<std::string> outputs;
  bool complete = false;  // false when the run stopped early; outputs may be partial
  bool passed = false;
  std::size_t hard_failures = 0;
  std::size_t soft_failures = 0;
  std::string error;

  std::string to_json() const;
};

// Writes to a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

// ---------------------------------------------------------------------------
// Runner

enum class OutputFormat { csv, json };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "ssflab-out";
  unsigned workers = 1;
  OutputFormat format = OutputFormat::csv;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int config_error = 2;
}  // namespace exit_code

// Runs one experiment and writes config.yaml, <experiment>.csv (or .json) tables,
// <experiment>_record.json, <experiment>_plot.dat/.gp and manifest.json into out_dir.
int run_command(ExperimentKind kind, const std::optional<std::string>& config_path, const RunOptions& options,
                std::ostream& log);

// Reduced invariant suites of every module; one PASS/FAIL line each.
int selftest(std::ostream& log, unsigned workers = 1);

std::string tool_version();

}  // namespace ssflab
