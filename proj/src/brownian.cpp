#include "ssflab/brownian.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ssflab/parallel.hpp"
#include "ssflab/random_field.hpp"

namespace ssflab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_axis(int axis, int dimension, std::vector<std::string>& errors) {
  if (axis < 0 || axis >= dimension) errors.push_back("axis " + std::to_string(axis) + " outside dimension");
}

void check_box(const Point& lo, const Point& hi, int dimension, std::vector<std::string>& errors) {
  if (static_cast<int>(lo.size()) != dimension || static_cast<int>(hi.size()) != dimension) {
    errors.push_back("box corners must have " + std::to_string(dimension) + " coordinates");
    return;
  }
  for (int i = 0; i < dimension; ++i)
    if (!(hi[i] > lo[i])) errors.push_back("degenerate box along axis " + std::to_string(i));
}

double box_distance(const Point& lo, const Point& hi, const Point& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = std::max({lo[i] - y[i], 0.0, y[i] - hi[i]});
    s += d * d;
  }
  return std::sqrt(s);
}

// Probability that a bridge of duration dt (diffusion constant 2) between two points on
// the same side of a flat barrier touches it; a, b are the distances to the barrier.
double crossing(double a, double b, double dt) { return std::exp(-a * b / dt); }

}  // namespace

RegionSpec::RegionSpec(int dimension, Geometry geometry) : dimension_(dimension), geometry_(std::move(geometry)) {
  std::vector<std::string> errors;
  if (dimension < 1 || dimension > 3) errors.push_back("dimension must be 1, 2 or 3");
  std::visit(overloaded{
                 [&](const HalfSpace& g) { check_axis(g.axis, dimension, errors); },
                 [&](const Slab& g) {
                   check_axis(g.axis, dimension, errors);
                   if (!(g.hi > g.lo)) errors.push_back("slab needs hi > lo");
                 },
                 [&](const SlabComplement& g) {
                   check_axis(g.axis, dimension, errors);
                   if (!(g.hi > g.lo)) errors.push_back("slab needs hi > lo");
                 },
                 [&](const Box& g) { check_box(g.lo, g.hi, dimension, errors); },
                 [&](const BoxComplement& g) { check_box(g.lo, g.hi, dimension, errors); },
             },
             geometry_);
  if (!errors.empty()) {
    std::string msg = "invalid region:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw std::invalid_argument(msg);
  }
}

bool RegionSpec::contains(const Point& y) const {
  return std::visit(overloaded{
                        [&](const HalfSpace& g) { return g.upper ? y[g.axis] >= g.threshold : y[g.axis] <= g.threshold; },
                        [&](const Slab& g) { return y[g.axis] >= g.lo && y[g.axis] <= g.hi; },
                        [&](const SlabComplement& g) { return y[g.axis] <= g.lo || y[g.axis] >= g.hi; },
                        [&](const Box& g) {
                          for (int i = 0; i < dimension_; ++i)
                            if (y[i] < g.lo[i] || y[i] > g.hi[i]) return false;
                          return true;
                        },
                        [&](const BoxComplement& g) {
                          for (int i = 0; i < dimension_; ++i)
                            if (y[i] <= g.lo[i] || y[i] >= g.hi[i]) return true;
                          return false;
                        },
                    },
                    geometry_);
}

double RegionSpec::distance(const Point& y) const {
  if (static_cast<int>(y.size()) != dimension_) throw std::invalid_argument("point dimension does not match region");
  return std::visit(overloaded{
                        [&](const HalfSpace& g) {
                          return std::max(0.0, g.upper ? g.threshold - y[g.axis] : y[g.axis] - g.threshold);
                        },
                        [&](const Slab& g) { return std::max({g.lo - y[g.axis], 0.0, y[g.axis] - g.hi}); },
                        [&](const SlabComplement& g) {
                          return std::max(0.0, std::min(y[g.axis] - g.lo, g.hi - y[g.axis]));
                        },
                        [&](const Box& g) { return box_distance(g.lo, g.hi, y); },
                        [&](const BoxComplement& g) {
                          double d = std::numeric_limits<double>::infinity();
                          for (int i = 0; i < dimension_; ++i) d = std::min({d, y[i] - g.lo[i], g.hi[i] - y[i]});
                          return std::max(0.0, d);
                        },
                    },
                    geometry_);
}

bool RegionSpec::supports_bridge() const { return !std::holds_alternative<Box>(geometry_) || dimension_ == 1; }

std::string RegionSpec::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const HalfSpace& g) { os << "halfspace(axis=" << g.axis << (g.upper ? ",y>=" : ",y<=") << g.threshold << ")"; },
                 [&](const Slab& g) { os << "slab(axis=" << g.axis << "," << g.lo << "," << g.hi << ")"; },
                 [&](const SlabComplement& g) { os << "slab_complement(axis=" << g.axis << "," << g.lo << "," << g.hi << ")"; },
                 [&](const Box& g) {
                   os << "box(";
                   for (int i = 0; i < dimension_; ++i) os << (i ? "x" : "") << "[" << g.lo[i] << "," << g.hi[i] << "]";
                   os << ")";
                 },
                 [&](const BoxComplement& g) {
                   os << "box_complement(";
                   for (int i = 0; i < dimension_; ++i) os << (i ? "x" : "") << "[" << g.lo[i] << "," << g.hi[i] << "]";
                   os << ")";
                 },
             },
             geometry_);
  return os.str();
}

namespace {

// Per-step crossing probability for a step y1 -> y2 with both endpoints outside the region.
double step_crossing(const RegionSpec& region, const Point& y1, const Point& y2, double dt) {
  return std::visit(
      overloaded{
          [&](const HalfSpace& g) {
            const double a = g.upper ? g.threshold - y1[g.axis] : y1[g.axis] - g.threshold;
            const double b = g.upper ? g.threshold - y2[g.axis] : y2[g.axis] - g.threshold;
            return crossing(a, b, dt);
          },
          [&](const Slab& g) {
            const double u = y1[g.axis], v = y2[g.axis];
            if ((u < g.lo && v > g.hi) || (u > g.hi && v < g.lo)) return 1.0;
            return u < g.lo ? crossing(g.lo - u, g.lo - v, dt) : crossing(u - g.hi, v - g.hi, dt);
          },
          [&](const SlabComplement& g) {
            const double u = y1[g.axis], v = y2[g.axis];
            const double stay = (1.0 - crossing(u - g.lo, v - g.lo, dt)) * (1.0 - crossing(g.hi - u, g.hi - v, dt));
            return 1.0 - stay;
          },
          [&](const Box& g) {
            // one dimension: a box is a slab
            const double u = y1[0], v = y2[0];
            if ((u < g.lo[0] && v > g.hi[0]) || (u > g.hi[0] && v < g.lo[0])) return 1.0;
            return u < g.lo[0] ? crossing(g.lo[0] - u, g.lo[0] - v, dt) : crossing(u - g.hi[0], v - g.hi[0], dt);
          },
          [&](const BoxComplement& g) {
            // faces treated as independent barriers
            double stay = 1.0;
            for (std::size_t i = 0; i < y1.size(); ++i) {
              stay *= 1.0 - crossing(y1[i] - g.lo[i], y2[i] - g.lo[i], dt);
              stay *= 1.0 - crossing(g.hi[i] - y1[i], g.hi[i] - y2[i], dt);
            }
            return 1.0 - stay;
          },
      },
      region.geometry());
}

struct PathResult {
  double q = 0.0;       // conditional hit probability given the skeleton
  bool plain = false;   // skeleton point inside the region
  Point end;
};

class PathSampler {
 public:
  PathSampler(std::uint64_t seed, int nu) : key_(derive_key(seed, rng_domain::kBrownian)), nu_(nu) {}

  // Per-coordinate N(0, 2 dt) increments for step `step` of path `path`.
  void increments(std::size_t path, std::size_t step, double sd, double* out) const {
    const auto lo = static_cast<std::uint32_t>(path & 0xffffffffu);
    const auto hi = static_cast<std::uint32_t>(path >> 32);
    for (int call = 0; call * 2 < nu_; ++call) {
      const auto r = Philox4x32::generate({lo, hi, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(call)}, key_);
      const double u1 = 1.0 - to_unit_double(r[0], r[1]);  // (0, 1]
      const double u2 = to_unit_double(r[2], r[3]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      const double ang = 2.0 * std::numbers::pi * u2;
      out[2 * call] = sd * rad * std::cos(ang);
      if (2 * call + 1 < nu_) out[2 * call + 1] = sd * rad * std::sin(ang);
    }
  }

 private:
  Philox4x32::Key key_;
  int nu_;
};

PathResult run_path(const PathSampler& sampler, std::size_t path, const Point& x, const RegionSpec& region,
                    std::size_t steps, double dt, bool bridge) {
  PathResult r;
  Point y = x;
  if (region.contains(y)) {
    r.q = 1.0;
    r.plain = true;
    r.end = y;
    // still advance to report the endpoint
  }
  const double sd = std::sqrt(2.0 * dt);
  double log_stay = 0.0;
  bool hit = r.plain;
  double inc[3];
  Point next(x.size());
  for (std::size_t s = 0; s < steps; ++s) {
    sampler.increments(path, s, sd, inc);
    for (std::size_t i = 0; i < x.size(); ++i) next[i] = y[i] + inc[i];
    if (!hit) {
      if (region.contains(next)) {
        hit = true;
        r.plain = true;
      } else if (bridge) {
        const double p = step_crossing(region, y, next, dt);
        if (p >= 1.0) {
          hit = true;
        } else if (p > 0.0) {
          log_stay += std::log1p(-p);
        }
      }
    }
    y.swap(next);
  }
  r.end = y;
  r.q = hit ? 1.0 : -std::expm1(log_stay);
  return r;
}

std::size_t step_count(double t, double& dt) {
  if (!(t > 0.0)) throw std::invalid_argument("hitting: t must be positive");
  if (dt == 0.0) dt = t / 512.0;
  if (!(dt > 0.0) || dt > t / 10.0) throw std::invalid_argument("hitting: need 0 < dt <= t/10");
  const auto steps = static_cast<std::size_t>(std::llround(t / dt));
  dt = t / static_cast<double>(steps);
  return steps;
}

}  // namespace

HittingEstimate simulate_hitting(const Point& x, const RegionSpec& region, double t, const HittingOptions& options) {
  if (static_cast<int>(x.size()) != region.dimension()) throw std::invalid_argument("hitting: point dimension mismatch");
  if (options.paths < 1000) throw std::invalid_argument("hitting: need at least 1000 paths");
  HittingEstimate e;
  e.dt = options.dt;
  const std::size_t steps = step_count(t, e.dt);
  e.paths = options.paths;
  e.bridge = options.bridge && region.supports_bridge();
  e.bridge_fallback = options.bridge && !region.supports_bridge();
  e.x = x;
  e.region = region.describe();
  e.t = t;

  const PathSampler sampler(options.seed, region.dimension());
  std::vector<double> q(options.paths), plain(options.paths);
  Executor(options.workers).for_each_index(options.paths, [&](std::size_t p) {
    const auto r = run_path(sampler, p, x, region, steps, e.dt, e.bridge);
    q[p] = r.q;
    plain[p] = r.plain ? 1.0 : 0.0;
  });
  const auto n = static_cast<double>(options.paths);
  e.estimate = std::clamp(pairwise_sum(q) / n, 0.0, 1.0);
  e.plain_estimate = pairwise_sum(plain) / n;
  e.standard_error = std::sqrt(e.estimate * (1.0 - e.estimate) / n);
  return e;
}

double gaussian_bound(const Point& x, const RegionSpec& region, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gaussian_bound: t must be positive");
  const double d = region.distance(x);
  if (!(d > 0.0)) throw std::invalid_argument("gaussian_bound: x lies inside or on the boundary of the region");
  const double nu = region.dimension();
  return 2.0 * nu * std::exp(-d * d / (4.0 * nu * t));
}

double joint_bound_constant(int nu, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("joint_bound_constant: eps must be positive");
  return std::pow((4.0 + eps) / eps, nu / 4.0);
}

JointBoundRecord joint_bound_check(const Point& x, const Box& box, double t, const HittingOptions& options,
                                   double eps) {
  const int nu = static_cast<int>(x.size());
  const RegionSpec inside(nu, box);  // validates
  const RegionSpec exit_region(nu, BoxComplement{box.lo, box.hi});
  if (options.paths < 1000) throw std::invalid_argument("joint_bound_check: need at least 1000 paths");
  double dt = options.dt;
  const std::size_t steps = step_count(t, dt);

  JointBoundRecord rec;
  rec.x = x;
  rec.t = t;
  rec.distance = inside.distance(x);
  rec.inside = inside.contains(x);
  rec.constant = joint_bound_constant(nu, eps);
  rec.envelope = rec.inside ? 1.0 : rec.constant * std::exp(-rec.distance * rec.distance / (2.0 * (4.0 + eps) * t));

  const PathSampler sampler(options.seed, nu);
  std::vector<double> lhs(options.paths), exitp(options.paths);
  Executor(options.workers).for_each_index(options.paths, [&](std::size_t p) {
    const auto r = run_path(sampler, p, x, exit_region, steps, dt, options.bridge);
    exitp[p] = r.q;
    lhs[p] = inside.contains(r.end) ? r.q : 0.0;
  });
  const auto n = static_cast<double>(options.paths);
  const auto sl = sample_stats(lhs);
  const auto se = sample_stats(exitp);
  rec.lhs = sl.mean;
  rec.lhs_stderr = std::sqrt(sl.variance / n);
  rec.exit_probability = se.mean;
  rec.exit_stderr = std::sqrt(se.variance / n);
  rec.rhs = std::sqrt(rec.exit_probability) * rec.envelope;
  const double rhs_hi = std::sqrt(std::min(1.0, rec.exit_probability + 3.0 * rec.exit_stderr)) * rec.envelope;
  rec.holds = rec.lhs - 3.0 * rec.lhs_stderr <= rhs_hi;
  return rec;
}

double free_heat_kernel(const Point& x, const Point& y, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("free_heat_kernel: t must be positive");
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("free_heat_kernel: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double nu = static_cast<double>(x.size());
  return std::pow(4.0 * std::numbers::pi * t, -nu / 2.0) * std::exp(-r2 / (4.0 * t));
}

double OverlapProfile::operator()(double r) const {
  if (kind == Kind::exponential) return std::exp(-scale * r);
  const double s = 1.0 - (r * r) / (scale * scale);
  return s > 0.0 ? s * s * s : 0.0;
}

OverlapProfile OverlapProfile::exponential(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("overlap profile: exponential rate must be positive");
  return {Kind::exponential, a};
}

OverlapProfile OverlapProfile::bump(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("overlap profile: bump radius must be positive");
  return {Kind::bump, radius};
}

double boundary_overlap(const OverlapProfile& f, double L, int nu) {
  if (!(L > 0.0)) throw std::invalid_argument("boundary_overlap: L must be positive");
  if (nu < 1 || nu > 3) throw std::invalid_argument("boundary_overlap: nu must be 1, 2 or 3");
  if (!(f.scale > 0.0) || !std::isfinite(f.scale)) throw std::invalid_argument("boundary_overlap: profile is not integrable");
  if (nu == 1 && f.kind == OverlapProfile::Kind::exponential) {
    const double a = f.scale;
    return 2.0 * (-std::expm1(-a * L)) / (a * a * L);
  }
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  const double reach = f.kind == OverlapProfile::Kind::bump ? f.scale : inf;
  // breakpoints per axis: the kink of (L - |z|)_+ and the end of the support
  std::vector<std::pair<double, double>> pieces;
  if (reach <= L) {
    pieces.push_back({0.0, reach});
  } else {
    pieces.push_back({0.0, L});
    pieces.push_back({L, reach});
  }
  const double volume = std::pow(L, nu);
  // Integrand over the positive orthant; the 2^nu symmetry factor is applied at the end.
  std::function<double(int, double, double)> integrate_axis = [&](int axis, double r2, double prod) -> double {
    double total = 0.0;
    for (const auto& [a, b] : pieces) {
      auto g = [&](double z) {
        const double nr2 = r2 + z * z;
        const double np = prod * std::max(L - z, 0.0);
        if (axis + 1 == nu) return f(std::sqrt(nr2)) * (volume - np);
        return integrate_axis(axis + 1, nr2, np);
      };
      total += gauss_kronrod<double, 31>::integrate(g, a, b, 12, 1e-11);
    }
    return total;
  };
  return std::pow(2.0, nu) * integrate_axis(0, 0.0, 1.0) / volume;
}

}  // namespace ssflab
