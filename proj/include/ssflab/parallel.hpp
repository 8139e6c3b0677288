#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

namespace ssflab {

// Worker facility handed down by the harness. Tasks are addressed by index and write
// their result into slot `index`, so results never depend on scheduling.
class Executor {
 public:
  explicit Executor(unsigned workers = 1);

  unsigned workers() const { return workers_; }

  void for_each_index(std::size_t count, const std::function<void(std::size_t)>& task) const;

  template <class R, class F>
  std::vector<R> map(std::size_t count, F&& f) const {
    std::vector<R> out(count);
    for_each_index(count, [&](std::size_t i) { out[i] = f(i); });
    return out;
  }

 private:
  unsigned workers_;
};

// Pairwise summation with a fixed split tree (independent of any parallel layout).
double pairwise_sum(std::span<const double> values);

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
  std::size_t count = 0;
};
SampleStats sample_stats(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double ci_low = 0.0;   // slope -/+ 2 standard errors
  double ci_high = 0.0;
};
// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);
// Fit of log|y| against log x.
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace ssflab
