#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "ssflab/model.hpp"
#include "ssflab/random_field.hpp"
#include "ssflab/spectral.hpp"

using namespace ssflab;

namespace {

// Deterministic uniform draws for test matrices.
struct TestRng {
  Philox4x32::Key key;
  std::uint32_t counter = 0;
  explicit TestRng(std::uint64_t seed) : key(derive_key(seed, rng_domain::kTesting)) {}
  double uniform(double a, double b) {
    const auto r = Philox4x32::generate({counter++, 0, 0, 0}, key);
    return a + (b - a) * to_unit_double(r[0], r[1]);
  }
};

Eigen::MatrixXd random_symmetric(TestRng& rng, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

Eigen::VectorXd oracle(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

long oracle_count(const Eigen::VectorXd& ev, double lambda) {
  long c = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) c += ev[i] < lambda ? 1 : 0;
  return c;
}

Hamiltonian alloy(const Grid& g, std::uint64_t seed, std::uint64_t r, DistributionSpec spec, double depth) {
  const AnchorLattice anchors{};
  const auto c = sample_couplings(spec, covering_window(g, anchors), seed, r);
  return assemble_hamiltonian(g, assemble_potential(g, SingleSiteProfile::point(g.dimension(), depth), c, anchors,
                                                    Cutoff::none()));
}

}  // namespace

TEST_CASE("count_below small cases") {
  Eigen::MatrixXd d = Eigen::Vector3d(1, 2, 3).asDiagonal();
  CHECK(count_below(d, 2.5) == 2);
  const auto h = free_hamiltonian(build_grid(1, 1.0, {5}));
  CHECK(count_below(h.matrix, 2.0 - 1e-9) == 2);
  CHECK(count_below(h.matrix, 2.0 + 1e-9) == 3);
  CHECK(count_below(h.matrix, -1.0) == 0);
  CHECK(count_below(h.matrix, 5.0) == 5);
}

TEST_CASE("count_below matches the dense oracle on random symmetric matrices") {
  TestRng rng(1);
  int mismatches = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform(0.0, 120.0));
    const Eigen::MatrixXd m = random_symmetric(rng, n);
    const auto ev = oracle(m);
    for (int k = 0; k < 20; ++k) {
      double lambda = rng.uniform(ev[0] - 1.0, ev[n - 1] + 1.0);
      const double gap = (ev.array() - lambda).abs().minCoeff();
      if (gap < 1e-8) continue;
      if (count_below(m, lambda) != oracle_count(ev, lambda)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("band counting on lattice Hamiltonians and fallbacks") {
  const DistributionSpec spec(Uniform{-3.0, 3.0});
  for (std::uint64_t r = 0; r < 5; ++r) {
    const auto h = alloy(build_grid(2, 1.0, {12, 9}), 4, r, spec, 1.0);
    const auto ev = oracle(h.matrix.to_dense());
    for (double lambda = -4.0; lambda < 12.0; lambda += 0.37) {
      if ((ev.array() - lambda).abs().minCoeff() < 1e-8) continue;
      const auto res = count_below_detailed(h.matrix, lambda);
      CHECK(res.count == oracle_count(ev, lambda));
    }
  }
  // An exact zero pivot forces the fallback path.
  SymmetricBandMatrix m(3, 2);
  m.set(0, 0, 1.0);
  m.set(1, 1, 1.0);
  m.set(2, 2, 5.0);
  m.set(1, 0, 1.0);
  m.set(2, 1, 0.5);
  const auto ev = oracle(m.to_dense());
  const auto res = count_below_detailed(m, 1.0);
  CHECK(res.method != CountMethod::band_ldlt);
  CHECK(res.count == oracle_count(ev, 1.0));
}

TEST_CASE("sturm count on the analytic dirichlet spectrum") {
  const int n = 60;
  std::vector<double> d(n, 2.0), e(n - 1, -1.0);
  for (int k = 1; k <= n; ++k) {
    const double ek = 2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1));
    CHECK(sturm_count(d, e, ek - 1e-7) == k - 1);
    CHECK(sturm_count(d, e, ek + 1e-7) == k);
  }
}

TEST_CASE("counting is monotone with the expected limits") {
  const auto h = alloy(build_grid(2, 1.0, {8, 8}), 2, 0, DistributionSpec(Uniform{-1.0, 1.0}), 1.0);
  const auto [lo, hi] = h.matrix.gershgorin();
  CHECK(count_below(h.matrix, lo - 1e-9) == 0);
  CHECK(count_below(h.matrix, hi + 1e-9) == 64);
  long prev = 0;
  for (double l = lo; l <= hi; l += 0.1) {
    const long c = count_below(h.matrix, l);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("eig_all") {
  Eigen::MatrixXd one(1, 1);
  one << 4.5;
  CHECK(eig_all(one).values == std::vector<double>{4.5});
  Eigen::MatrixXd d = Eigen::Vector3d(3, 1, 2).asDiagonal();
  const auto s = eig_all(d).values;
  CHECK(s == std::vector<double>{1.0, 2.0, 3.0});
  Eigen::MatrixXd two(2, 2);
  two << 0.3, -2.0, -2.0, 0.3;
  const auto t = eig_all(two).values;
  CHECK(t[0] == doctest::Approx(-1.7));
  CHECK(t[1] == doctest::Approx(2.3));

  SpectralLimits tight;
  tight.dense_limit = 10;
  CHECK_THROWS_AS(eig_all(Eigen::MatrixXd::Identity(11, 11), false, tight), SizeLimitError);

  // band path vs dense path vs Eigen
  const auto h = alloy(build_grid(2, 1.0, {30, 6}), 3, 1, DistributionSpec(Uniform{-1.0, 1.0}), 1.0);
  const auto band = eig_all(h.matrix).values;
  const auto withv = eig_all(h.matrix, true);
  const auto ev = oracle(h.matrix.to_dense());
  for (std::size_t i = 0; i < band.size(); ++i) {
    CHECK(band[i] == doctest::Approx(ev[i]).epsilon(1e-11));
    CHECK(withv.values[i] == doctest::Approx(ev[i]).epsilon(1e-11));
  }
  const Eigen::MatrixXd hd = h.matrix.to_dense();
  const Eigen::MatrixXd& v = *withv.vectors;
  const double norm = h.matrix.inf_norm();
  for (std::size_t i = 0; i < band.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    CHECK((hd * v.col(k) - withv.values[i] * v.col(k)).norm() <= 1e-8 * norm);
  }
}

TEST_CASE("bump functions") {
  const auto g = SpectralFunction::bump(-1.0, 0.5);
  CHECK(g.value(-0.25) == doctest::Approx(1.0));
  CHECK(g.value(-1.0) == 0.0);
  CHECK(g.value(0.7) == 0.0);
  // derivative against central differences, and the closed-form maximum on a fine grid
  double best = 0.0;
  for (double x = -0.999; x < 0.5; x += 1e-4) {
    const double fd = (g.value(x + 1e-6) - g.value(x - 1e-6)) / 2e-6;
    CHECK(g.derivative(x) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    best = std::max(best, std::abs(g.derivative(x)));
  }
  CHECK(best <= g.max_abs_derivative() + 1e-12);
  CHECK(best == doctest::Approx(g.max_abs_derivative()).epsilon(1e-6));
  CHECK_THROWS(SpectralFunction::bump(1.0, 1.0));
}

TEST_CASE("heat traces") {
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  CHECK(heat_trace(eig_all(zero).values, 2.0) == 1.0);
  const std::vector<double> ev{1.0, 2.0};
  CHECK(heat_trace(ev, 1.0) == doctest::Approx(std::exp(-1.0) + std::exp(-2.0)).epsilon(1e-15));
  CHECK_THROWS(heat_trace(ev, 0.0));

  // strictly decreasing and log-convex in t for a positive-definite H
  const auto h = free_hamiltonian(build_grid(2, 1.0, {7, 7}));
  const auto spec = eig_all(h.matrix).values;
  for (double t = 0.2; t < 3.0; t += 0.3) {
    const double a = heat_trace(spec, t), b = heat_trace(spec, t + 0.1), c = heat_trace(spec, t + 0.2);
    CHECK(b < a);
    CHECK(std::log(b) < 0.5 * (std::log(a) + std::log(c)));
  }
}

TEST_CASE("stochastic trace agrees with the oracle within 3 standard errors") {
  const auto h = alloy(build_grid(1, 1.0, {300}), 8, 0, DistributionSpec(Uniform{-1.0, 1.0}), 1.0);
  for (double t : {0.5, 1.0, 2.0}) {
    const double exact = heat_trace(h.matrix, t);
    const auto est = heat_trace_stochastic(h.matrix, t, 200, 17);
    CHECK(est.standard_error > 0.0);
    CHECK(std::abs(est.estimate - exact) <= 3.0 * est.standard_error);
  }
  // the polynomial itself is exact: for a diagonal matrix Rademacher probes give the trace exactly
  SymmetricBandMatrix d(50, 0);
  for (std::size_t i = 0; i < 50; ++i) d.set(i, i, 0.1 * static_cast<double>(i));
  const auto est = heat_trace_stochastic(d, 1.3, 4, 3);
  CHECK(est.estimate == doctest::Approx(heat_trace(d, 1.3)).epsilon(1e-13));
}

TEST_CASE("heat semigroup identities") {
  const auto h = alloy(build_grid(1, 1.0, {40}), 5, 0, DistributionSpec(Uniform{-1.0, 1.0}), 1.0);
  const double norm = h.matrix.inf_norm();
  const Eigen::MatrixXd tiny = heat_semigroup(h.matrix, 1e-8);
  CHECK((tiny - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() <= 1e-6 * norm);
  const Eigen::MatrixXd a = heat_semigroup(h.matrix, 0.7);
  const Eigen::MatrixXd b = heat_semigroup(h.matrix, 0.4);
  const Eigen::MatrixXd ab = heat_semigroup(h.matrix, 1.1);
  CHECK((a * b - ab).norm() <= 1e-10 * ab.norm());
  // exp(-tH0) = exp(-2t) exp(tA) with A the (nonnegative) adjacency matrix; the Taylor
  // series of exp(tA) has only nonnegative terms and resolves the tiny far entries.
  const int n = 50;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n), series = term;
  for (int k = 1; k < 200; ++k) {
    term = (term * adj / k).eval();
    series += term;
  }
  const Eigen::MatrixXd taylor = std::exp(-2.0) * series;
  CHECK(taylor.minCoeff() > 0.0);
  const Eigen::MatrixXd free = heat_semigroup(free_hamiltonian(build_grid(1, 1.0, {n})).matrix, 1.0);
  CHECK((free - taylor).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(a == a.transpose());
}

TEST_CASE("appendix monotonicity at matrix level") {
  const Grid g = build_grid(2, 1.0, {9, 9});
  TestRng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    PotentialField v1 = zero_potential(g), v2 = zero_potential(g);
    for (std::size_t i = 0; i < g.site_count(); ++i) {
      v2.values[i] = rng.uniform(-1.0, 1.0);
      v1.values[i] = v2.values[i] + rng.uniform(0.0, 1.0);
    }
    const Eigen::MatrixXd e1 = heat_semigroup(assemble_hamiltonian(g, v1).matrix, 0.8);
    const Eigen::MatrixXd e2 = heat_semigroup(assemble_hamiltonian(g, v2).matrix, 0.8);
    Eigen::VectorXd f(g.site_count());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = rng.uniform(0.0, 1.0);
    CHECK(((e1 * f).array() <= (e2 * f).array() + 1e-12).all());
    CHECK(supnorm_rows(e1) <= supnorm_rows(e2) + 1e-12);
  }
}

TEST_CASE("matrix functions and partial traces") {
  const auto h = alloy(build_grid(1, 1.0, {30}), 6, 0, DistributionSpec(Uniform{-1.0, 1.0}), 1.0);
  const auto o = eig_all(h.matrix, true);
  const Eigen::MatrixXd id = apply_function(o, SpectralFunction::constant(1.0));
  CHECK((id - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(apply_function(o, SpectralFunction::exponential(1.0)).trace() ==
        doctest::Approx(heat_trace(h.matrix, 1.0)).epsilon(1e-12));
  const Eigen::MatrixXd below = apply_function(o, SpectralFunction::bump(o.values.front() - 3.0, o.values.front() - 1.0));
  CHECK(below.cwiseAbs().maxCoeff() == 0.0);
  const auto diag = function_diagonal(o, SpectralFunction::bump(0.0, 3.0));
  const Eigen::MatrixXd full = apply_function(o, SpectralFunction::bump(0.0, 3.0));
  CHECK((diag - full.diagonal()).cwiseAbs().maxCoeff() < 1e-13);

  const Grid g = build_grid(1, 1.0, {30});
  const SiteBox box = SiteBox::make(g, {4, 0, 0}, {17, 0, 0});
  const auto in = box.sites(g), out = box.complement_sites(g);
  CHECK(partial_trace(full, in) + partial_trace(full, out) == doctest::Approx(full.trace()).epsilon(1e-14));
  const auto all = SiteBox::full(g).sites(g);
  CHECK(partial_trace(full, all) == doctest::Approx(full.trace()).epsilon(1e-14));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(30, 30);
  CHECK(partial_trace(eye, in) == 14.0);
  const std::size_t bad[] = {30};
  CHECK_THROWS_AS(partial_trace(eye, bad), std::out_of_range);
}

TEST_CASE("norms") {
  Eigen::MatrixXd a = Eigen::Vector2d(1, 0).asDiagonal();
  CHECK(trace_norm(a - Eigen::MatrixXd::Zero(2, 2)) == 1.0);
  CHECK(supnorm_rows(Eigen::MatrixXd::Identity(5, 5)) == 1.0);
  TestRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    CHECK(trace_norm(m) >= std::abs(m.trace()) - 1e-12);
    // symmetric and general paths agree
    const Eigen::MatrixXd s = m + m.transpose();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
    CHECK(trace_norm(s) == doctest::Approx(svd.singularValues().sum()).epsilon(1e-12));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = random_symmetric(rng, 12), y = random_symmetric(rng, 12);
    CHECK(trace_norm(x + y) <= trace_norm(x) + trace_norm(y) + 1e-12);
  }
}
