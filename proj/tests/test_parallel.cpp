#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ssflab/parallel.hpp"

using namespace ssflab;

TEST_CASE("executor fills every slot and reports the lowest failure") {
  for (unsigned w : {1u, 3u, 8u}) {
    const Executor ex(w);
    const auto out = ex.map<double>(1000, [](std::size_t i) { return std::sqrt(static_cast<double>(i)); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == std::sqrt(static_cast<double>(i)));
    try {
      ex.for_each_index(100, [](std::size_t i) {
        if (i == 17 || i == 60) throw std::runtime_error("task " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "task 17");
    }
  }
}

TEST_CASE("pairwise sums do not depend on the worker count") {
  std::vector<double> v(10007);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + static_cast<double>(i));
  const double s = pairwise_sum(v);
  const auto again = Executor(4).map<double>(v.size(), [&](std::size_t i) { return v[i]; });
  CHECK(pairwise_sum(again) == s);
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("sample statistics and fits") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto s = sample_stats(x);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  const std::vector<double> y{3, 5, 7, 9};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> xs{8, 16, 32}, ys{1.0 / 8, 1.0 / 16, 1.0 / 32};
  CHECK(fit_loglog(xs, ys).slope == doctest::Approx(-1.0));
  CHECK_THROWS(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}));
}
