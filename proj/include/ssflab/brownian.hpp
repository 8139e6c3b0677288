#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace ssflab {

// Point in R^nu, nu in {1, 2, 3}.
using Point = std::vector<double>;

// {y : y[axis] >= threshold} (upper = true) or {y : y[axis] <= threshold}.
struct HalfSpace {
  int axis = 0;
  double threshold = 0.0;
  bool upper = true;
};
// {y : lo <= y[axis] <= hi}.
struct Slab {
  int axis = 0;
  double lo = 0.0;
  double hi = 0.0;
};
// {y : y[axis] <= lo or y[axis] >= hi}.
struct SlabComplement {
  int axis = 0;
  double lo = 0.0;
  double hi = 0.0;
};
// Closed box prod [lo_i, hi_i].
struct Box {
  Point lo;
  Point hi;
};
// Complement of the open box prod (lo_i, hi_i).
struct BoxComplement {
  Point lo;
  Point hi;
};

class RegionSpec {
 public:
  using Geometry = std::variant<HalfSpace, Slab, SlabComplement, Box, BoxComplement>;

  // Validates the geometry against the dimension; throws std::invalid_argument.
  RegionSpec(int dimension, Geometry geometry);

  int dimension() const { return dimension_; }
  const Geometry& geometry() const { return geometry_; }

  bool contains(const Point& y) const;
  // Euclidean distance from y to the region (0 inside).
  double distance(const Point& y) const;
  // Whether the per-step bridge correction is available for this geometry.
  bool supports_bridge() const;
  std::string describe() const;

 private:
  int dimension_;
  Geometry geometry_;
};

struct HittingEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  // Endpoint-only detection on the same paths.
  double plain_estimate = 0.0;
  std::size_t paths = 0;
  double dt = 0.0;
  bool bridge = false;
  // Set when bridge correction was requested but the geometry does not support it.
  bool bridge_fallback = false;
  Point x;
  std::string region;
  double t = 0.0;
};

struct HittingOptions {
  std::size_t paths = 100000;
  double dt = 0.0;  // 0 selects t / 512
  bool bridge = true;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// P_x{tau_B <= t} for the diffusion generated by -Laplacian (per-coordinate increment
// variance 2 dt). Starting inside B counts as an immediate hit.
HittingEstimate simulate_hitting(const Point& x, const RegionSpec& region, double t, const HittingOptions& options);

// 2 nu exp(-d^2 / (4 nu t)), d = dist(x, B) > 0.
double gaussian_bound(const Point& x, const RegionSpec& region, double t);

// ((4 + eps) / eps)^(nu / 4): square root of the proof integral
// (4 pi)^(-nu/2) int exp(-eps y^2 / (4 eps + 16)) dy.
double joint_bound_constant(int nu, double eps = 1.0);

struct JointBoundRecord {
  Point x;
  double t = 0.0;
  bool inside = false;
  double distance = 0.0;
  double lhs = 0.0;  // E_x{chi_B(X_t); tau_{B^c} <= t}
  double lhs_stderr = 0.0;
  double exit_probability = 0.0;  // P_x{tau_{B^c} <= t}
  double exit_stderr = 0.0;
  double envelope = 1.0;          // 1 inside, C_eps exp(-d^2/(2(4+eps)t)) outside
  double constant = 0.0;
  double rhs = 0.0;               // sqrt(exit_probability) * envelope
  bool holds = false;             // lhs - 3 se <= rhs (with the exit probability at its upper 3 se)
};

JointBoundRecord joint_bound_check(const Point& x, const Box& box, double t, const HittingOptions& options,
                                   double eps = 1.0);

// (4 pi t)^(-nu/2) exp(-|x-y|^2 / (4t)).
double free_heat_kernel(const Point& x, const Point& y, double t);

// Integrable radial profiles for the boundary-overlap integral.
struct OverlapProfile {
  enum class Kind { exponential, bump };
  Kind kind = Kind::exponential;
  double scale = 1.0;  // decay rate a for exp(-a|z|), radius R for (1 - |z|^2/R^2)^3_+

  double operator()(double r) const;
  static OverlapProfile exponential(double a);
  static OverlapProfile bump(double radius);
};

// (1 / L^nu) int_{[0,L]^nu} int_{complement} f(x - y) dy dx, reduced to
// int f(z) (L^nu - prod (L - |z_i|)_+) dz / L^nu.
double boundary_overlap(const OverlapProfile& f, double L, int nu);

}  // namespace ssflab
