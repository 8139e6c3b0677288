#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "ssflab/brownian.hpp"

using namespace ssflab;
using boost::math::quadrature::gauss_kronrod;

TEST_CASE("regions") {
  const RegionSpec half(2, HalfSpace{0, 1.5, true});
  CHECK(half.contains({2.0, -7.0}));
  CHECK(half.distance({0.0, 3.0}) == 1.5);
  const RegionSpec box(2, Box{{0.0, 0.0}, {1.0, 2.0}});
  CHECK(box.distance({4.0, 6.0}) == doctest::Approx(5.0));
  CHECK(box.distance({0.5, 1.0}) == 0.0);
  const RegionSpec outside(2, BoxComplement{{0.0, 0.0}, {1.0, 2.0}});
  CHECK(outside.distance({0.5, 1.0}) == doctest::Approx(0.5));
  CHECK(outside.contains({3.0, 1.0}));
  const RegionSpec sc(1, SlabComplement{0, -1.0, 2.0});
  CHECK(sc.distance({0.0}) == 1.0);
  CHECK_THROWS_AS(RegionSpec(2, Box{{0.0, 0.0}, {0.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(RegionSpec(1, HalfSpace{1, 0.0, true}), std::invalid_argument);
  CHECK_THROWS_AS(RegionSpec(4, HalfSpace{}), std::invalid_argument);
  CHECK_FALSE(box.supports_bridge());
  CHECK(outside.supports_bridge());
}

TEST_CASE("gaussian bound") {
  const RegionSpec half(1, HalfSpace{0, 2.0, true});
  CHECK(gaussian_bound({0.0}, half, 1.0) == doctest::Approx(2.0 * std::exp(-1.0)));
  CHECK(gaussian_bound({0.0}, half, 1.0) >= std::erfc(1.0));
  double prev = INFINITY;
  for (double d = 0.5; d < 20.0; d *= 1.5) {
    const double b = gaussian_bound({0.0}, RegionSpec(1, HalfSpace{0, d, true}), 1.0);
    CHECK(b < prev);
    prev = b;
  }
  CHECK(prev < 1e-30);
  CHECK_THROWS(gaussian_bound({3.0}, half, 1.0));
  CHECK_THROWS(gaussian_bound({2.0}, half, 1.0));
}

TEST_CASE("hitting probabilities") {
  HittingOptions opt;
  opt.paths = 100000;
  opt.seed = 5;
  SUBCASE("start inside") {
    opt.paths = 1000;
    const auto e = simulate_hitting({3.0}, RegionSpec(1, HalfSpace{0, 2.0, true}), 1.0, opt);
    CHECK(e.estimate == 1.0);
  }
  SUBCASE("reflection principle") {
    const auto e = simulate_hitting({0.0}, RegionSpec(1, HalfSpace{0, 2.0, true}), 1.0, opt);
    CHECK(std::abs(e.estimate - std::erfc(1.0)) <= 3.0 * e.standard_error);
    CHECK(e.estimate >= e.plain_estimate);
    CHECK(e.standard_error == doctest::Approx(std::sqrt(e.estimate * (1 - e.estimate) / 1e5)));
    opt.bridge = false;
    const auto plain = simulate_hitting({0.0}, RegionSpec(1, HalfSpace{0, 2.0, true}), 1.0, opt);
    CHECK(plain.estimate == e.plain_estimate);
    CHECK(plain.estimate < std::erfc(1.0));
  }
  SUBCASE("monotone in t") {
    opt.paths = 20000;
    double prev = 0.0, prev_se = 0.0;
    for (double t : {0.25, 1.0, 4.0}) {
      const auto e = simulate_hitting({0.0}, RegionSpec(1, HalfSpace{0, 1.0, true}), t, opt);
      CHECK(e.estimate + 3.0 * e.standard_error >= prev - 3.0 * prev_se);
      prev = e.estimate;
      prev_se = e.standard_error;
    }
  }
  SUBCASE("box entry falls back with a flag") {
    opt.paths = 2000;
    const auto e = simulate_hitting({0.0, 0.0}, RegionSpec(2, Box{{1.0, -1.0}, {2.0, 1.0}}), 1.0, opt);
    CHECK(e.bridge_fallback);
    CHECK_FALSE(e.bridge);
  }
  SUBCASE("worker count does not change the estimate") {
    opt.paths = 5000;
    const auto a = simulate_hitting({0.0, 0.0}, RegionSpec(2, HalfSpace{1, 1.0, true}), 1.0, opt);
    opt.workers = 4;
    const auto b = simulate_hitting({0.0, 0.0}, RegionSpec(2, HalfSpace{1, 1.0, true}), 1.0, opt);
    CHECK(a.estimate == b.estimate);
  }
  SUBCASE("preconditions") {
    opt.paths = 10;
    CHECK_THROWS(simulate_hitting({0.0}, RegionSpec(1, HalfSpace{0, 1.0, true}), 1.0, opt));
    opt.paths = 1000;
    opt.dt = 0.5;
    CHECK_THROWS(simulate_hitting({0.0}, RegionSpec(1, HalfSpace{0, 1.0, true}), 1.0, opt));
  }
}

TEST_CASE("slab exit matches the two-barrier series") {
  // P(exit (-1, 1) by time t from 0) with diffusion constant 1 (variance 2t):
  // 1 - sum_k 4/(pi (2k+1)) (-1)^k exp(-(2k+1)^2 pi^2 t / 4)
  const double t = 0.5;
  double stay = 0.0;
  for (int k = 0; k < 50; ++k)
    stay += 4.0 / (std::numbers::pi * (2 * k + 1)) * (k % 2 ? -1.0 : 1.0) *
            std::exp(-(2 * k + 1) * (2 * k + 1) * std::numbers::pi * std::numbers::pi * t / 4.0);
  HittingOptions opt;
  opt.paths = 50000;
  const auto e = simulate_hitting({0.0}, RegionSpec(1, SlabComplement{0, -1.0, 1.0}), t, opt);
  CHECK(std::abs(e.estimate - (1.0 - stay)) <= 3.0 * e.standard_error + 2e-3);
}

TEST_CASE("joint bound") {
  HittingOptions opt;
  opt.paths = 100000;
  const Box b{{-1.0, -1.0}, {1.0, 1.0}};
  const auto inside = joint_bound_check({0.0, 0.0}, b, 0.5, opt);
  CHECK(inside.inside);
  CHECK(inside.envelope == 1.0);
  CHECK(inside.holds);
  CHECK(inside.lhs <= std::sqrt(inside.exit_probability) + 3.0 * inside.lhs_stderr);
  const auto outside = joint_bound_check({2.0, 0.0}, b, 0.5, opt);
  CHECK_FALSE(outside.inside);
  CHECK(outside.distance == doctest::Approx(1.0));
  CHECK(outside.exit_probability == 1.0);
  CHECK(outside.holds);
  const auto deep = joint_bound_check({0.0, 0.0}, Box{{-5.0, -5.0}, {5.0, 5.0}}, 0.01, opt);
  CHECK(deep.lhs == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(deep.holds);
  CHECK(joint_bound_constant(2, 1.0) == doctest::Approx(std::sqrt(5.0)));
  // the constant squared is the proof integral (4 pi)^(-nu/2) int exp(-eps y^2/(4 eps + 16)) dy
  const double one_d = gauss_kronrod<double, 61>::integrate(
      [](double y) { return std::exp(-y * y / 20.0) / std::sqrt(4.0 * std::numbers::pi); }, -INFINITY, INFINITY);
  CHECK(joint_bound_constant(1, 1.0) * joint_bound_constant(1, 1.0) == doctest::Approx(one_d).epsilon(1e-10));
  CHECK_THROWS(joint_bound_check({0.0, 0.0}, Box{{0.0, 0.0}, {0.0, 1.0}}, 0.5, opt));
}

TEST_CASE("free heat kernel") {
  CHECK(free_heat_kernel({0.3}, {0.3}, 1.0 / (4.0 * std::numbers::pi)) == doctest::Approx(1.0));
  CHECK(free_heat_kernel({0.1, 2.0}, {1.0, -1.0}, 0.7) == free_heat_kernel({1.0, -1.0}, {0.1, 2.0}, 0.7));
  CHECK(free_heat_kernel({0.0}, {30.0}, 0.1) >= 0.0);
  const double mass = gauss_kronrod<double, 61>::integrate(
      [](double y) { return free_heat_kernel({0.4}, {y}, 0.8); }, -INFINITY, INFINITY);
  CHECK(std::abs(mass - 1.0) <= 1e-6);
  const double ck = gauss_kronrod<double, 61>::integrate(
      [](double z) { return free_heat_kernel({0.0}, {z}, 0.3) * free_heat_kernel({z}, {1.0}, 0.5); }, -INFINITY,
      INFINITY);
  CHECK(std::abs(ck - free_heat_kernel({0.0}, {1.0}, 0.8)) <= 1e-6);
  CHECK_THROWS(free_heat_kernel({0.0}, {0.0}, 0.0));
}

TEST_CASE("boundary overlap") {
  const auto f = OverlapProfile::exponential(1.0);
  CHECK(boundary_overlap(f, 10.0, 1) == doctest::Approx(2.0 * (1.0 - std::exp(-10.0)) / 10.0).epsilon(1e-14));
  // direct double integral as an independent path
  const double L = 3.0;
  const double direct = gauss_kronrod<double, 61>::integrate(
      [&](double x) {
        return gauss_kronrod<double, 61>::integrate([&](double y) { return std::exp(-(x - y)); }, -INFINITY, 0.0) +
               gauss_kronrod<double, 61>::integrate([&](double y) { return std::exp(-(y - x)); }, L, INFINITY);
      },
      0.0, L);
  CHECK(boundary_overlap(f, L, 1) == doctest::Approx(direct / L).epsilon(1e-9));
  double prev = INFINITY;
  for (double l : {10.0, 20.0, 40.0, 80.0}) {
    const double v = boundary_overlap(f, l, 1);
    CHECK(v < prev);
    prev = v;
  }
  for (int nu : {2, 3}) {
    double p = INFINITY;
    for (double l : {4.0, 8.0, 16.0}) {
      const double v = boundary_overlap(OverlapProfile::bump(1.5), l, nu);
      CHECK(v <= p);
      p = v;
    }
  }
  // unnormalized growth ~ L^(nu-1) in 2D
  std::vector<double> lx, ly;
  for (double l : {10.0, 20.0, 40.0, 80.0}) {
    lx.push_back(std::log(l));
    ly.push_back(std::log(boundary_overlap(f, l, 2) * l * l));
  }
  const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
  CHECK(std::abs(slope - 1.0) <= 0.2);
  CHECK_THROWS(boundary_overlap(OverlapProfile{OverlapProfile::Kind::exponential, 0.0}, 1.0, 1));
  CHECK_THROWS(boundary_overlap(f, -1.0, 1));
}
