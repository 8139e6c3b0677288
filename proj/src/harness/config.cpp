#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "ssflab/harness.hpp"

namespace ssflab {

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

class Reader {
 public:
  std::vector<std::string> errors;

  void unknown_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) errors.push_back(prefixed(path, key) + ": unknown key");
    }
  }

  bool map(const YAML::Node& node, const std::string& path) {
    if (node.IsMap()) return true;
    errors.push_back(path + ": expected a mapping");
    return false;
  }

  template <class T>
  void scalar(const YAML::Node& parent, const std::string& path, const std::string& key, T& out, const char* what) {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      if (!n.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "");
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      errors.push_back(prefixed(path, key) + ": expected " + what);
    }
  }

  void integer(const YAML::Node& parent, const std::string& path, const std::string& key, int& out) {
    long long v = out;
    scalar(parent, path, key, v, "an integer");
    if (v < INT32_MIN || v > INT32_MAX)
      errors.push_back(prefixed(path, key) + ": out of range");
    else
      out = static_cast<int>(v);
  }

  template <class T>
  void list(const YAML::Node& parent, const std::string& key, std::vector<T>& out, const char* what) {
    const YAML::Node n = parent[key];
    if (!n) return;
    if (!n.IsSequence()) {
      errors.push_back(key + ": expected a list of " + what);
      return;
    }
    std::vector<T> v;
    for (std::size_t i = 0; i < n.size(); ++i) {
      try {
        v.push_back(n[i].as<T>());
      } catch (const YAML::Exception&) {
        errors.push_back(key + "[" + std::to_string(i) + "]: expected " + what);
      }
    }
    out = std::move(v);
  }

  void number_map(const YAML::Node& parent, const std::string& key, std::map<std::string, double>& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    if (!map(n, key)) return;
    for (const auto& kv : n) {
      const std::string k = kv.first.as<std::string>();
      try {
        out[k] = kv.second.as<double>();
      } catch (const YAML::Exception&) {
        errors.push_back(key + "." + k + ": expected a number");
      }
    }
  }

  static std::string prefixed(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

void read_distribution(Reader& rd, const YAML::Node& n, DistributionSpec& out);

void read_distribution_checked(Reader& rd, const YAML::Node& n, DistributionSpec& out) {
  try {
    read_distribution(rd, n, out);
  } catch (const std::invalid_argument& e) {
    rd.errors.push_back(std::string("distribution: ") + e.what());
  }
}

void read_distribution(Reader& rd, const YAML::Node& n, DistributionSpec& out) {
  if (!rd.map(n, "distribution")) return;
  std::string kind;
  rd.scalar(n, "distribution", "kind", kind, "a string");
  if (kind == "bernoulli") {
    Bernoulli b;
    rd.unknown_keys(n, "distribution", {"kind", "p", "zero", "one"});
    rd.scalar(n, "distribution", "p", b.p, "a number");
    rd.scalar(n, "distribution", "zero", b.zero, "a number");
    rd.scalar(n, "distribution", "one", b.one, "a number");
    out = DistributionSpec(b);
  } else if (kind == "uniform") {
    Uniform u;
    rd.unknown_keys(n, "distribution", {"kind", "a", "b"});
    rd.scalar(n, "distribution", "a", u.a, "a number");
    rd.scalar(n, "distribution", "b", u.b, "a number");
    out = DistributionSpec(u);
  } else if (kind == "discrete") {
    Discrete d;
    rd.unknown_keys(n, "distribution", {"kind", "values", "weights"});
    const YAML::Node v = n["values"], w = n["weights"];
    try {
      if (v) d.values = v.as<std::vector<double>>();
      if (w) d.weights = w.as<std::vector<double>>();
    } catch (const YAML::Exception&) {
      rd.errors.push_back("distribution: values and weights must be lists of numbers");
    }
    out = DistributionSpec(d);
  } else {
    rd.errors.push_back("distribution.kind: expected bernoulli, uniform or discrete");
  }
}

YAML::Node distribution_node(const DistributionSpec& spec) {
  YAML::Node n;
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          n["kind"] = "bernoulli";
          n["p"] = d.p;
          n["zero"] = d.zero;
          n["one"] = d.one;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          n["kind"] = "uniform";
          n["a"] = d.a;
          n["b"] = d.b;
        } else {
          n["kind"] = "discrete";
          n["values"] = d.values;
          n["weights"] = d.weights;
        }
      },
      spec.kind());
  return n;
}

const char* profile_name(ProfileSpec::Kind k) {
  switch (k) {
    case ProfileSpec::Kind::point:
      return "point";
    case ProfileSpec::Kind::cell:
      return "cell";
    case ProfileSpec::Kind::exponential:
      return "exponential";
  }
  return "?";
}

const char* function_name(SpectralFunction::Kind k) {
  switch (k) {
    case SpectralFunction::Kind::bump:
      return "bump";
    case SpectralFunction::Kind::exponential:
      return "exponential";
    case SpectralFunction::Kind::resolvent_power:
      return "resolvent_power";
    case SpectralFunction::Kind::constant:
      return "constant";
  }
  return "?";
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error("invalid configuration: " + join(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> expected) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("config: not valid YAML: ") + e.what()});
  }
  Reader rd;
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError({"config: expected a mapping at the top level"});

  std::optional<ExperimentKind> kind = expected;
  if (const YAML::Node e = root["experiment"]) {
    std::string name;
    rd.scalar(root, "", "experiment", name, "a string");
    const auto k = experiment_from_string(name);
    if (!k)
      throw ConfigError({"experiment: unknown experiment '" + name + "'"});
    if (expected && *k != *expected)
      throw ConfigError({"experiment: config names " + name + " but the command runs " + to_string(*expected)});
    kind = k;
  }
  if (!kind) throw ConfigError({"experiment: missing"});

  ExperimentConfig c = default_config(*kind);
  rd.unknown_keys(root, "", {"experiment", "grid", "distribution", "profile", "function", "schedule", "energies", "times",
                             "distances", "realizations", "seed", "params", "tolerances"});

  if (const YAML::Node g = root["grid"]; g && rd.map(g, "grid")) {
    rd.unknown_keys(g, "grid", {"dimension", "spacing", "margin", "ambient_factor", "transverse"});
    rd.integer(g, "grid", "dimension", c.grid.dimension);
    rd.scalar(g, "grid", "spacing", c.grid.spacing, "a number");
    rd.integer(g, "grid", "margin", c.grid.margin);
    rd.integer(g, "grid", "ambient_factor", c.grid.ambient_factor);
    rd.integer(g, "grid", "transverse", c.grid.transverse);
  }
  if (const YAML::Node d = root["distribution"]) read_distribution_checked(rd, d, c.distribution);
  if (const YAML::Node p = root["profile"]; p && rd.map(p, "profile")) {
    rd.unknown_keys(p, "profile", {"kind", "depth", "width", "rate"});
    std::string kind_name = profile_name(c.profile.kind);
    rd.scalar(p, "profile", "kind", kind_name, "a string");
    if (kind_name == "point")
      c.profile.kind = ProfileSpec::Kind::point;
    else if (kind_name == "cell")
      c.profile.kind = ProfileSpec::Kind::cell;
    else if (kind_name == "exponential")
      c.profile.kind = ProfileSpec::Kind::exponential;
    else
      rd.errors.push_back("profile.kind: expected point, cell or exponential");
    rd.scalar(p, "profile", "depth", c.profile.depth, "a number");
    rd.integer(p, "profile", "width", c.profile.width);
    rd.scalar(p, "profile", "rate", c.profile.rate, "a number");
  }
  if (const YAML::Node f = root["function"]; f && rd.map(f, "function")) {
    rd.unknown_keys(f, "function", {"kind", "a", "b", "t"});
    std::string kind_name = function_name(c.function.kind);
    rd.scalar(f, "function", "kind", kind_name, "a string");
    if (kind_name == "bump")
      c.function.kind = SpectralFunction::Kind::bump;
    else if (kind_name == "exponential")
      c.function.kind = SpectralFunction::Kind::exponential;
    else if (kind_name == "constant")
      c.function.kind = SpectralFunction::Kind::constant;
    else
      rd.errors.push_back("function.kind: expected bump, exponential or constant");
    rd.scalar(f, "function", "a", c.function.a, "a number");
    rd.scalar(f, "function", "b", c.function.b, "a number");
    rd.scalar(f, "function", "t", c.function.t, "a number");
  }
  rd.list(root, "schedule", c.schedule, "integers");
  rd.list(root, "energies", c.energies, "numbers");
  rd.list(root, "times", c.times, "numbers");
  rd.list(root, "distances", c.distances, "numbers");
  if (root["realizations"]) {
    long long r = 0;
    rd.scalar(root, "", "realizations", r, "an integer");
    if (r < 1)
      rd.errors.push_back("realizations: must be >= 1");
    else
      c.realizations = static_cast<std::size_t>(r);
  }
  if (root["seed"]) {
    long long s = -1;
    rd.scalar(root, "", "seed", s, "a non-negative integer");
    if (s < 0)
      rd.errors.push_back("seed: must be a non-negative integer");
    else
      c.seed = static_cast<std::uint64_t>(s);
  }
  rd.number_map(root, "params", c.params);
  rd.number_map(root, "tolerances", c.tolerances);

  std::vector<std::string> errors = rd.errors;
  for (auto& e : validate_config(c)) errors.push_back(std::move(e));
  // de-duplicate while keeping order
  std::vector<std::string> unique;
  for (auto& e : errors)
    if (std::find(unique.begin(), unique.end(), e) == unique.end()) unique.push_back(e);
  if (!unique.empty()) throw ConfigError(unique);
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot read " + path});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), expected);
}

std::string config_to_yaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "experiment" << YAML::Value << to_string(c.kind);
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dimension" << YAML::Value << c.grid.dimension;
  out << YAML::Key << "spacing" << YAML::Value << c.grid.spacing;
  out << YAML::Key << "margin" << YAML::Value << c.grid.margin;
  out << YAML::Key << "ambient_factor" << YAML::Value << c.grid.ambient_factor;
  out << YAML::Key << "transverse" << YAML::Value << c.grid.transverse;
  out << YAML::EndMap;
  out << YAML::Key << "distribution" << YAML::Value << distribution_node(c.distribution);
  out << YAML::Key << "profile" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << profile_name(c.profile.kind);
  out << YAML::Key << "depth" << YAML::Value << c.profile.depth;
  out << YAML::Key << "width" << YAML::Value << c.profile.width;
  out << YAML::Key << "rate" << YAML::Value << c.profile.rate;
  out << YAML::EndMap;
  out << YAML::Key << "function" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << function_name(c.function.kind);
  out << YAML::Key << "a" << YAML::Value << c.function.a;
  out << YAML::Key << "b" << YAML::Value << c.function.b;
  out << YAML::Key << "t" << YAML::Value << c.function.t;
  out << YAML::EndMap;
  out << YAML::Key << "schedule" << YAML::Value << YAML::Flow << c.schedule;
  out << YAML::Key << "energies" << YAML::Value << YAML::Flow << c.energies;
  out << YAML::Key << "times" << YAML::Value << YAML::Flow << c.times;
  out << YAML::Key << "distances" << YAML::Value << YAML::Flow << c.distances;
  out << YAML::Key << "realizations" << YAML::Value << static_cast<unsigned long long>(c.realizations);
  out << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(c.seed);
  out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : c.params) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "tolerances" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : c.tolerances) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace ssflab
