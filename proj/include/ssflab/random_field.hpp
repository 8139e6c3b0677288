#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ssflab {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

// Uniform double in [0, 1) from two 32-bit words (53 significant bits).
double to_unit_double(std::uint32_t hi, std::uint32_t lo);

// Domain-separated Philox key derived from a master seed.
Philox4x32::Key derive_key(std::uint64_t seed, std::uint64_t domain);

namespace rng_domain {
inline constexpr std::uint64_t kCouplings = 0x636f75706c696e67ULL;
inline constexpr std::uint64_t kBrownian = 0x62726f776e69616eULL;
inline constexpr std::uint64_t kProbes = 0x70726f6265730000ULL;
inline constexpr std::uint64_t kTesting = 0x74657374696e6700ULL;
}  // namespace rng_domain

struct Bernoulli {
  double p = 0.5;  // probability of drawing `one`
  double zero = 0.0;
  double one = 1.0;
};
struct Uniform {
  double a = 0.0;
  double b = 1.0;
};
struct Discrete {
  std::vector<double> values;
  std::vector<double> weights;
};

// Common single-site distribution of the couplings. Only bounded supports exist.
class DistributionSpec {
 public:
  using Kind = std::variant<Bernoulli, Uniform, Discrete>;

  DistributionSpec() : kind_(Bernoulli{}) {}
  explicit DistributionSpec(Kind kind);

  const Kind& kind() const { return kind_; }
  // Maps a uniform variate in [0, 1) to a coupling value.
  double draw(double u) const;
  std::pair<double, double> support() const;
  double mean() const;
  double variance() const;
  std::string describe() const;

 private:
  Kind kind_;
};

// Throws std::invalid_argument naming every violated constraint.
void validate(const DistributionSpec& spec);

// Integer window of a sublattice Z^d, inclusive bounds, row-major (axis 0 slowest).
struct LatticeWindow {
  int dimension = 1;
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};

  static LatticeWindow make(int dimension, std::array<int, 3> lo, std::array<int, 3> hi);
  std::size_t size() const;
  bool contains(const std::array<int, 3>& j) const;
  std::size_t index(const std::array<int, 3>& j) const;
  std::array<int, 3> point(std::size_t index) const;
  LatticeWindow translated(const std::array<int, 3>& k) const;
};

// Coupling values alpha_j on a sublattice window. The value at j is a pure function of
// (seed, realization, j - offset), so enlarging the window never changes existing values.
struct CouplingField {
  LatticeWindow window;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;
  std::array<int, 3> offset{0, 0, 0};
  std::string id;

  double at(const std::array<int, 3>& j) const { return values[window.index(j)]; }
};

// Single counter-based draw keyed by (seed, realization, site).
double coupling_value(const DistributionSpec& spec, std::uint64_t seed, std::uint64_t realization,
                      const std::array<int, 3>& site);

CouplingField sample_couplings(const DistributionSpec& spec, const LatticeWindow& window,
                               std::uint64_t seed, std::uint64_t realization);

// alpha_j(T_k omega) = alpha_{j-k}(omega).
CouplingField shift_field(const CouplingField& field, const std::array<int, 3>& k);

// (alpha+, alpha-) with alpha+ = max(alpha, 0), alpha- = min(alpha, 0), selected by comparison.
std::pair<CouplingField, CouplingField> split_signs(const CouplingField& field);

CouplingField constant_field(const LatticeWindow& window, double value);

}  // namespace ssflab
