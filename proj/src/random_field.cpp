#include "ssflab/random_field.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ssflab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double to_unit_double(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (static_cast<std::uint64_t>(lo) >> 11);
  return static_cast<double>(bits & ((1ULL << 53) - 1)) * 0x1.0p-53;
}

Philox4x32::Key derive_key(std::uint64_t seed, std::uint64_t domain) {
  const std::uint64_t k = splitmix64(seed ^ splitmix64(domain));
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

// ---------------------------------------------------------------------------
// DistributionSpec

DistributionSpec::DistributionSpec(Kind kind) : kind_(std::move(kind)) { validate(*this); }

double DistributionSpec::draw(double u) const {
  return std::visit(
      [u](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return u < d.p ? d.one : d.zero;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return d.a + (d.b - d.a) * u;
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i + 1 < d.values.size(); ++i) {
            acc += d.weights[i];
            if (u < acc) return d.values[i];
          }
          return d.values.back();
        }
      },
      kind_);
}

std::pair<double, double> DistributionSpec::support() const {
  return std::visit(
      [](const auto& d) -> std::pair<double, double> {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          if (d.p == 0.0) return {d.zero, d.zero};
          if (d.p == 1.0) return {d.one, d.one};
          return {std::min(d.zero, d.one), std::max(d.zero, d.one)};
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return {d.a, d.b};
        } else {
          double lo = INFINITY, hi = -INFINITY;
          for (std::size_t i = 0; i < d.values.size(); ++i) {
            if (d.weights[i] == 0.0) continue;
            lo = std::min(lo, d.values[i]);
            hi = std::max(hi, d.values[i]);
          }
          return {lo, hi};
        }
      },
      kind_);
}

double DistributionSpec::mean() const {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return d.p * d.one + (1.0 - d.p) * d.zero;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return 0.5 * (d.a + d.b);
        } else {
          double m = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i) m += d.weights[i] * d.values[i];
          return m;
        }
      },
      kind_);
}

double DistributionSpec::variance() const {
  return std::visit(
      [this](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          const double s = d.one - d.zero;
          return d.p * (1.0 - d.p) * s * s;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return (d.b - d.a) * (d.b - d.a) / 12.0;
        } else {
          const double m = mean();
          double v = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            v += d.weights[i] * (d.values[i] - m) * (d.values[i] - m);
          return v;
        }
      },
      kind_);
}

std::string DistributionSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&os](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          os << "bernoulli(p=" << d.p << ",v0=" << d.zero << ",v1=" << d.one << ")";
        } else if constexpr (std::is_same_v<T, Uniform>) {
          os << "uniform(" << d.a << "," << d.b << ")";
        } else {
          os << "discrete(";
          for (std::size_t i = 0; i < d.values.size(); ++i)
            os << (i ? ";" : "") << d.values[i] << ":" << d.weights[i];
          os << ")";
        }
      },
      kind_);
  return os.str();
}

void validate(const DistributionSpec& spec) {
  std::vector<std::string> errors;
  std::visit(
      [&errors](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          if (!(d.p >= 0.0 && d.p <= 1.0)) errors.emplace_back("bernoulli probability must lie in [0,1]");
          if (!std::isfinite(d.zero) || !std::isfinite(d.one)) errors.emplace_back("bernoulli values must be finite");
        } else if constexpr (std::is_same_v<T, Uniform>) {
          if (!std::isfinite(d.a) || !std::isfinite(d.b)) errors.emplace_back("uniform bounds must be finite");
          else if (d.a > d.b) errors.emplace_back("uniform requires a <= b");
        } else {
          if (d.values.empty()) errors.emplace_back("discrete distribution needs at least one value");
          if (d.values.size() != d.weights.size()) errors.emplace_back("discrete values and weights differ in length");
          double total = 0.0;
          for (double w : d.weights) {
            if (!(w >= 0.0 && w <= 1.0)) errors.emplace_back("discrete weights must lie in [0,1]");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-12) errors.emplace_back("discrete weights must sum to 1");
          for (double v : d.values)
            if (!std::isfinite(v)) errors.emplace_back("discrete values must be finite");
        }
      },
      spec.kind());
  if (!errors.empty()) {
    std::string msg = "invalid distribution:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw std::invalid_argument(msg);
  }
}

// ---------------------------------------------------------------------------
// LatticeWindow

LatticeWindow LatticeWindow::make(int dimension, std::array<int, 3> lo, std::array<int, 3> hi) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("LatticeWindow: dimension must be 1, 2 or 3");
  LatticeWindow w;
  w.dimension = dimension;
  for (int a = 0; a < 3; ++a) {
    if (a >= dimension) {
      lo[a] = hi[a] = 0;
    } else if (lo[a] > hi[a]) {
      throw std::invalid_argument("LatticeWindow: lo must not exceed hi");
    }
  }
  w.lo = lo;
  w.hi = hi;
  return w;
}

std::size_t LatticeWindow::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dimension; ++a) s *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
  return s;
}

bool LatticeWindow::contains(const std::array<int, 3>& j) const {
  for (int a = 0; a < dimension; ++a)
    if (j[a] < lo[a] || j[a] > hi[a]) return false;
  return true;
}

std::size_t LatticeWindow::index(const std::array<int, 3>& j) const {
  if (!contains(j)) throw std::out_of_range("LatticeWindow: coupling index outside the sublattice window");
  std::size_t idx = 0;
  for (int a = 0; a < dimension; ++a)
    idx = idx * static_cast<std::size_t>(hi[a] - lo[a] + 1) + static_cast<std::size_t>(j[a] - lo[a]);
  return idx;
}

std::array<int, 3> LatticeWindow::point(std::size_t index) const {
  std::array<int, 3> j{0, 0, 0};
  for (int a = dimension - 1; a >= 0; --a) {
    const auto ext = static_cast<std::size_t>(hi[a] - lo[a] + 1);
    j[a] = lo[a] + static_cast<int>(index % ext);
    index /= ext;
  }
  return j;
}

LatticeWindow LatticeWindow::translated(const std::array<int, 3>& k) const {
  LatticeWindow w = *this;
  for (int a = 0; a < dimension; ++a) {
    w.lo[a] += k[a];
    w.hi[a] += k[a];
  }
  return w;
}

// ---------------------------------------------------------------------------
// Coupling fields

double coupling_value(const DistributionSpec& spec, std::uint64_t seed, std::uint64_t realization,
                      const std::array<int, 3>& site) {
  const auto key = derive_key(seed, rng_domain::kCouplings);
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(site[0]), static_cast<std::uint32_t>(site[1]),
                                static_cast<std::uint32_t>(site[2]), static_cast<std::uint32_t>(realization)};
  const auto out = Philox4x32::generate(ctr, key);
  return spec.draw(to_unit_double(out[0], out[1]));
}

CouplingField sample_couplings(const DistributionSpec& spec, const LatticeWindow& window, std::uint64_t seed,
                               std::uint64_t realization) {
  validate(spec);
  if (realization > 0xFFFFFFFFULL) throw std::invalid_argument("sample_couplings: realization index exceeds 32 bits");
  CouplingField f;
  f.window = window;
  f.seed = seed;
  f.realization = realization;
  f.values.resize(window.size());
  for (std::size_t i = 0; i < f.values.size(); ++i)
    f.values[i] = coupling_value(spec, seed, realization, window.point(i));
  std::ostringstream os;
  os << spec.describe() << "@seed=" << seed << ",r=" << realization;
  f.id = os.str();
  return f;
}

CouplingField shift_field(const CouplingField& field, const std::array<int, 3>& k) {
  CouplingField out = field;
  out.window = field.window.translated(k);
  for (int a = 0; a < field.window.dimension; ++a) out.offset[a] += k[a];
  if (k != std::array<int, 3>{0, 0, 0}) {
    std::ostringstream os;
    os << field.id << "+shift(" << k[0] << "," << k[1] << "," << k[2] << ")";
    out.id = os.str();
  }
  return out;
}

std::pair<CouplingField, CouplingField> split_signs(const CouplingField& field) {
  CouplingField pos = field;
  CouplingField neg = field;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const double a = field.values[i];
    pos.values[i] = a > 0.0 ? a : 0.0;
    neg.values[i] = a < 0.0 ? a : 0.0;
  }
  pos.id = field.id + "[+]";
  neg.id = field.id + "[-]";
  return {std::move(pos), std::move(neg)};
}

CouplingField constant_field(const LatticeWindow& window, double value) {
  CouplingField f;
  f.window = window;
  f.values.assign(window.size(), value);
  std::ostringstream os;
  os.precision(17);
  os << "const(" << value << ")";
  f.id = os.str();
  return f;
}

}  // namespace ssflab
