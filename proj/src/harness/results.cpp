#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "ssflab/harness.hpp"

namespace ssflab {

namespace {

using nlohmann::json;

json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

// Non-finite table cells become {"double": "inf"} so they cannot collide with string cells.
json cell_json(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json{{"double", format_double(*d)}};
  return std::get<std::string>(c);
}

Cell cell_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number()) return j.get<double>();
  if (j.is_object()) {
    const std::string s = j.at("double").get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    throw std::runtime_error("json: bad non-finite cell " + s);
  }
  return j.get<std::string>();
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

// Unquoted fields are numbers; quoted fields are strings.
Cell parse_field(const std::string& field, bool quoted) {
  if (quoted) return field;
  long long i = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), i);
  if (ec == std::errc() && p == field.data() + field.size()) return i;
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  if (field == "nan") return NAN;
  char* end = nullptr;
  const double d = std::strtod(field.c_str(), &end);
  if (!field.empty() && end == field.c_str() + field.size()) return d;
  return field;
}

std::vector<std::vector<std::pair<std::string, bool>>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::pair<std::string, bool>>> rows;
  std::vector<std::pair<std::string, bool>> row;
  std::string field;
  bool quoted = false, in_quotes = false, any = false;
  auto end_field = [&] {
    row.emplace_back(field, quoted);
    field.clear();
    quoted = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      in_quotes = quoted = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_field();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
  if (any) {
    end_field();
    rows.push_back(std::move(row));
  }
  return rows;
}

double as_double(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}


}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string table_to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const Cell& c = row[i];
      if (const auto* n = std::get_if<long long>(&c))
        out += std::to_string(*n);
      else if (const auto* d = std::get_if<double>(&c))
        out += format_double(*d);
      else
        out += quote(std::get<std::string>(c));
    }
    out += '\n';
  }
  return out;
}

Table table_from_csv(const std::string& name, const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw std::runtime_error("csv: missing header");
  Table t;
  t.name = name;
  for (const auto& [f, q] : rows.front()) t.columns.push_back(f);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != t.columns.size())
      throw std::runtime_error("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " fields");
    std::vector<Cell> row;
    for (const auto& [f, q] : rows[r]) row.push_back(parse_field(f, q));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string tables_to_json(const std::vector<Table>& tables) {
  json out = json::array();
  for (const auto& t : tables) {
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r = json::array();
      for (const auto& c : row) r.push_back(cell_json(c));
      rows.push_back(std::move(r));
    }
    out.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}});
  }
  return json{{"tables", std::move(out)}}.dump(1) + "\n";
}

std::vector<Table> tables_from_json(const std::string& text) {
  const json j = json::parse(text);
  std::vector<Table> out;
  for (const auto& jt : j.at("tables")) {
    Table t;
    t.name = jt.at("name").get<std::string>();
    t.columns = jt.at("columns").get<std::vector<std::string>>();
    for (const auto& jr : jt.at("rows")) {
      std::vector<Cell> row;
      for (const auto& c : jr) row.push_back(cell_from_json(c));
      t.rows.push_back(std::move(row));
    }
    out.push_back(std::move(t));
  }
  return out;
}

bool same_values(const Table& a, const Table& b) {
  if (a.columns != b.columns || a.rows.size() != b.rows.size()) return false;
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    if (a.rows[r].size() != b.rows[r].size()) return false;
    for (std::size_t i = 0; i < a.rows[r].size(); ++i) {
      const Cell& x = a.rows[r][i];
      const Cell& y = b.rows[r][i];
      const bool xs = std::holds_alternative<std::string>(x), ys = std::holds_alternative<std::string>(y);
      if (xs || ys) {
        if (x != y) return false;
        continue;
      }
      const double dx = as_double(x), dy = as_double(y);
      if (std::isnan(dx) && std::isnan(dy)) continue;
      if (dx != dy) return false;
    }
  }
  return true;
}

std::string record_to_json(const ResultRecord& r, const std::string& digest) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name},
                      {"hard", c.hard},
                      {"passed", c.passed},
                      {"value", number(c.value)},
                      {"threshold", number(c.threshold)},
                      {"detail", c.detail}});
  json fits = json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"name", f.name},
                    {"slope", number(f.fit.slope)},
                    {"intercept", number(f.fit.intercept)},
                    {"slope_stderr", number(f.fit.slope_stderr)},
                    {"ci_low", number(f.fit.ci_low)},
                    {"ci_high", number(f.fit.ci_high)},
                    {"expected_low", number(f.expected_low)},
                    {"expected_high", number(f.expected_high)}});
  json values = json::object();
  for (const auto& [k, v] : r.values) values[k] = number(v);
  json series = json::array();
  for (const auto& s : r.series) {
    json pts = json::array();
    for (const auto& [x, y] : s.points) pts.push_back({number(x), number(y)});
    series.push_back({{"name", s.name}, {"x_label", s.x_label}, {"y_label", s.y_label}, {"points", std::move(pts)}});
  }
  json tables = json::array();
  for (const auto& t : r.tables) tables.push_back({{"name", t.name}, {"rows", t.rows.size()}});
  const json out = {{"schema", "ssflab.result/1"},
                    {"experiment", r.experiment},
                    {"seed", r.seed},
                    {"config_digest", digest},
                    {"passed", r.passed()},
                    {"checks", std::move(checks)},
                    {"fits", std::move(fits)},
                    {"values", std::move(values)},
                    {"series", std::move(series)},
                    {"tables", std::move(tables)},
                    {"warnings", r.warnings}};
  return out.dump(1) + "\n";
}

std::string plot_data(const ResultRecord& r) {
  std::string out;
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    const Series& s = r.series[i];
    if (i) out += "\n\n";
    out += "# " + s.name + "\n# " + s.x_label + " " + s.y_label + "\n";
    for (const auto& [x, y] : s.points) out += format_double(x) + " " + format_double(y) + "\n";
  }
  return out;
}

std::string plot_script(const ResultRecord& r, const std::string& data_file) {
  std::ostringstream os;
  os << "# gnuplot script for " << r.experiment << "\n";
  os << "set key outside\n";
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    const Series& s = r.series[i];
    bool positive = !s.points.empty();
    for (const auto& [x, y] : s.points) positive = positive && x > 0 && y > 0;
    os << "\nset title '" << s.name << "'\n";
    os << "set xlabel '" << s.x_label << "'\nset ylabel '" << s.y_label << "'\n";
    os << (positive ? "set logscale xy\n" : "unset logscale\n");
    os << "plot '" << data_file << "' index " << i << " using 1:2 with linespoints title '" << s.name << "'\n";
    os << "pause -1\n";
  }
  return os.str();
}

std::string RunManifest::to_json() const {
  const json out = {{"schema", "ssflab.manifest/1"},
                    {"experiment", experiment},
                    {"config_digest", config_digest},
                    {"seed", seed},
                    {"tool_version", tool_version},
                    {"started", started},
                    {"finished", finished},
                    {"workers", workers},
                    {"outputs", outputs},
                    {"complete", complete},
                    {"passed", passed},
                    {"hard_failures", hard_failures},
                    {"soft_failures", soft_failures},
                    {"error", error}};
  return out.dump(1) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace ssflab
