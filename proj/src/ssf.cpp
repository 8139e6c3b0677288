#include "ssflab/ssf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ssflab/parallel.hpp"

namespace ssflab {

EnergyGrid certify_energies(std::span<const double> lambdas, std::span<const SymmetricBandMatrix* const> operators,
                            bool widen) {
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!std::isfinite(lambdas[i])) throw std::invalid_argument("energy grid: non-finite energy");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw std::invalid_argument("energy grid: energies must be strictly increasing");
  }
  EnergyGrid grid;
  grid.lambdas.assign(lambdas.begin(), lambdas.end());
  grid.distance.assign(lambdas.size(), INFINITY);
  for (const SymmetricBandMatrix* op : operators) {
    const double base = spectral_margin(*op);
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      const double l = lambdas[i];
      if (!is_off_spectrum(*op, l, base)) {
        std::ostringstream os;
        os.precision(17);
        os << "energy " << l << " lies within " << base << " of an eigenvalue";
        throw OnSpectrumError(os.str(), l);
      }
      // widen the certified margin by decades while it stays clean
      double certified = base;
      for (int k = 1; widen && k <= 8; ++k) {
        const double wider = base * std::pow(10.0, k);
        if (!is_off_spectrum(*op, l, wider)) break;
        certified = wider;
      }
      grid.distance[i] = std::min(grid.distance[i], certified);
    }
  }
  return grid;
}

EnergyGrid off_spectrum_grid(double lo, double hi, std::size_t count,
                             std::span<const SymmetricBandMatrix* const> operators) {
  if (count == 0 || !(hi > lo)) throw std::invalid_argument("off_spectrum_grid: need count > 0 and hi > lo");
  std::vector<double> lambdas(count);
  double margin = 0.0;
  for (const auto* op : operators) margin = std::max(margin, spectral_margin(*op));
  const double step = count > 1 ? (hi - lo) / static_cast<double>(count - 1) : 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double l = lo + step * static_cast<double>(i);
    for (int attempt = 0; attempt < 64; ++attempt) {
      bool clean = true;
      for (const auto* op : operators)
        if (!is_off_spectrum(*op, l, margin)) clean = false;
      if (clean) break;
      l += 7.0 * margin * (attempt + 1);
    }
    lambdas[i] = l;
  }
  return certify_energies(lambdas, operators);
}

namespace {

double distance_to(const std::vector<double>& sorted, double l) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), l);
  double d = INFINITY;
  if (it != sorted.end()) d = *it - l;
  if (it != sorted.begin()) d = std::min(d, l - *std::prev(it));
  return d;
}

long below(std::span<const double> sorted, double l) {
  return static_cast<long>(std::lower_bound(sorted.begin(), sorted.end(), l) - sorted.begin());
}

}  // namespace

EnergyGrid off_spectrum_grid_sorted(double lo, double hi, std::size_t count,
                                    std::span<const std::vector<double>* const> spectra, double margin) {
  if (count == 0 || !(hi > lo)) throw std::invalid_argument("off_spectrum_grid_sorted: need count > 0 and hi > lo");
  if (!(margin > 0.0)) throw std::invalid_argument("off_spectrum_grid_sorted: margin must be positive");
  for (const auto* sp : spectra)
    if (!std::is_sorted(sp->begin(), sp->end())) throw std::invalid_argument("off_spectrum_grid_sorted: spectrum not ascending");
  EnergyGrid grid;
  const double step = count > 1 ? (hi - lo) / static_cast<double>(count - 1) : 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double l = lo + step * static_cast<double>(i);
    double dist = 0.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      dist = INFINITY;
      for (const auto* sp : spectra) dist = std::min(dist, distance_to(*sp, l));
      if (dist > margin) break;
      l += 7.0 * margin * (attempt + 1);
    }
    if (!(dist > margin)) throw OnSpectrumError("off_spectrum_grid_sorted: could not clear the spectra", l);
    if (!grid.lambdas.empty() && !(l > grid.lambdas.back()))
      throw std::invalid_argument("off_spectrum_grid_sorted: grid too fine for the margin");
    grid.lambdas.push_back(l);
    grid.distance.push_back(dist);
  }
  return grid;
}

std::vector<long> ssf_from_spectra(std::span<const double> eig_h, std::span<const double> eig_h0,
                                   std::span<const double> lambdas) {
  if (eig_h.size() != eig_h0.size()) throw std::invalid_argument("ssf_from_spectra: spectra differ in size");
  std::vector<long> xi(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) xi[i] = below(eig_h0, lambdas[i]) - below(eig_h, lambdas[i]);
  return xi;
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::raw:
      return "raw";
    case Normalization::per_volume:
      return "per_volume";
    case Normalization::per_area:
      return "per_area";
  }
  return "?";
}

SSFSample ssf_counting(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, std::span<const double> lambdas,
                       const std::string& pair_id) {
  if (h.size() != h0.size()) throw std::invalid_argument("ssf_counting: operators differ in size");
  const SymmetricBandMatrix* ops[] = {&h, &h0};
  certify_energies(lambdas, ops, false);
  SSFSample s;
  s.lambdas.assign(lambdas.begin(), lambdas.end());
  s.xi.resize(lambdas.size());
  s.pair_id = pair_id;
  for (std::size_t i = 0; i < lambdas.size(); ++i) s.xi[i] = count_below(h0, lambdas[i]) - count_below(h, lambdas[i]);
  return s;
}

SSFSample normalize(const SSFSample& sample, double measure, Normalization mode) {
  if (!(measure > 0.0) || !std::isfinite(measure)) throw std::invalid_argument("normalize: measure must be positive");
  if (sample.normalization != Normalization::raw) throw std::logic_error("normalize: sample is already normalized");
  if (mode == Normalization::raw) throw std::invalid_argument("normalize: target normalization must not be raw");
  SSFSample out = sample;
  out.measure = measure;
  out.normalization = mode;
  return out;
}

void write_ssf_csv(std::ostream& os, const SSFSample& sample) {
  os << "lambda,xi_raw,xi_normalized,normalization,pair_id\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < sample.lambdas.size(); ++i)
    os << sample.lambdas[i] << ',' << sample.xi[i] << ',' << sample.normalized(i) << ','
       << to_string(sample.normalization) << ',' << sample.pair_id << '\n';
  os.precision(old);
}

double step_integral(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, std::span<const double> eig_h,
                     std::span<const double> eig_h0, const std::function<double(double)>& primitive,
                     CountingSource source) {
  std::vector<double> points;
  points.reserve(eig_h.size() + eig_h0.size());
  points.insert(points.end(), eig_h.begin(), eig_h.end());
  points.insert(points.end(), eig_h0.begin(), eig_h0.end());
  std::sort(points.begin(), points.end());
  std::vector<double> terms;
  terms.reserve(points.size());
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double a = points[k];
    const double b = points[k + 1];
    if (!(b > a)) continue;
    const double dg = primitive(b) - primitive(a);
    if (dg == 0.0) continue;
    const double mid = 0.5 * (a + b);
    long xi = 0;
    if (source == CountingSource::matrices) {
      xi = count_below(h0, mid) - count_below(h, mid);
    } else {
      xi = static_cast<long>(std::lower_bound(eig_h0.begin(), eig_h0.end(), mid) - eig_h0.begin()) -
           static_cast<long>(std::lower_bound(eig_h.begin(), eig_h.end(), mid) - eig_h.begin());
    }
    if (xi != 0) terms.push_back(static_cast<double>(xi) * dg);
  }
  return pairwise_sum(terms);
}

BirmanKreinResult birman_krein_residual(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0,
                                        const SpectralFunction& g, const SpectralLimits& limits,
                                        CountingSource source) {
  if (h.size() != h0.size()) throw std::invalid_argument("birman_krein_residual: operators differ in size");
  const auto eh = eig_all(h, false, limits).values;
  const auto eh0 = eig_all(h0, false, limits).values;
  BirmanKreinResult r;
  std::vector<double> gh(eh.size()), gh0(eh0.size());
  for (std::size_t i = 0; i < eh.size(); ++i) gh[i] = g.value(eh[i]);
  for (std::size_t i = 0; i < eh0.size(); ++i) gh0[i] = g.value(eh0[i]);
  r.trace_difference = pairwise_sum(gh) - pairwise_sum(gh0);
  r.step_integral = step_integral(h, h0, eh, eh0, [&g](double x) { return g.value(x); }, source);
  r.residual = r.trace_difference - r.step_integral;
  r.tolerance = 1e-8 * static_cast<double>(h.size()) * g.max_abs_derivative();
  if (g.kind() == SpectralFunction::Kind::bump && !eh.empty()) {
    const auto [a, b] = g.support();
    const double lo = std::min(eh.front(), eh0.front());
    const double hi = std::max(eh.back(), eh0.back());
    r.support_outside_spectra = b <= lo || a >= hi;
  }
  return r;
}

namespace {

LaplaceResult finish_laplace(double trace_difference, double step) {
  LaplaceResult r;
  r.trace_difference = trace_difference;
  r.step_integral = step;
  const double scale = std::max(std::abs(trace_difference), std::abs(step));
  r.relative_difference = scale == 0.0 ? 0.0 : std::abs(trace_difference - step) / scale;
  return r;
}

}  // namespace

LaplaceResult laplace_functional(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, double t,
                                 const SpectralLimits& limits, CountingSource source) {
  if (!(t > 0.0)) throw std::invalid_argument("laplace_functional: t must be positive");
  if (h.size() != h0.size()) throw std::invalid_argument("laplace_functional: operators differ in size");
  const auto eh = eig_all(h, false, limits).values;
  const auto eh0 = eig_all(h0, false, limits).values;
  const double tr = heat_trace(eh, t) - heat_trace(eh0, t);
  const double step = step_integral(h, h0, eh, eh0, [t](double x) { return std::exp(-t * x); }, source);
  return finish_laplace(tr, step);
}

LaplaceResult laplace_functional(std::span<const double> eig_h, std::span<const double> eig_h0, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("laplace_functional: t must be positive");
  const SymmetricBandMatrix unused;
  const double tr = heat_trace(eig_h, t) - heat_trace(eig_h0, t);
  const double step =
      step_integral(unused, unused, eig_h, eig_h0, [t](double x) { return std::exp(-t * x); }, CountingSource::spectra);
  return finish_laplace(tr, step);
}

std::vector<long> ssf_via_semigroup(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0,
                                    std::span<const double> lambdas, double t, const SpectralLimits& limits) {
  const Eigen::MatrixXd eh = heat_semigroup(h, t, limits);
  const Eigen::MatrixXd eh0 = heat_semigroup(h0, t, limits);
  std::vector<long> out(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double mu = std::exp(-t * lambdas[i]);
    out[i] = -(count_below(eh0, mu) - count_below(eh, mu));
  }
  return out;
}

}  // namespace ssflab
