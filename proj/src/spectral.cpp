#include "ssflab/spectral.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <sstream>

#include <lapacke.h>
#include <unistd.h>

#include "ssflab/parallel.hpp"
#include "ssflab/random_field.hpp"

extern "C" void openblas_set_num_threads(int);
extern "C" void dgemm_(const char*, const char*, const int*, const int*, const int*, const double*, const double*,
                       const int*, const double*, const int*, const double*, double*, const int*);

namespace ssflab {

namespace {

// BLAS-level threading would make reductions depend on the thread count; parallelism
// lives in the Executor instead.
void pin_blas_threads() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

void check_dense_limit(std::size_t n, const SpectralLimits& limits, const char* what) {
  if (n > limits.dense_limit) {
    std::ostringstream os;
    os << what << ": order " << n << " exceeds the dense limit " << limits.dense_limit;
    throw SizeLimitError(os.str());
  }
}

// Deterministic well-conditioned test matrix.
Eigen::MatrixXd probe_matrix(int n, int seed) {
  Eigen::MatrixXd m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = std::sin(0.37 * (i + 1) + 0.11 * (j + 1) * (seed + 1)) + (i == j ? 2.0 : 0.0);
  return m;
}

bool probe_blas() {
  pin_blas_threads();
  // level 3 through the linked BLAS against Eigen's own kernels
  const int n = 320;
  const Eigen::MatrixXd a = probe_matrix(n, 0), b = probe_matrix(n, 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  const double one = 1.0, zero = 0.0;
  dgemm_("N", "N", &n, &n, &n, &one, a.data(), &n, b.data(), &n, &zero, c.data(), &n);
  Eigen::MatrixXd ref;
  ref.noalias() = a.lazyProduct(b);
  if (!((c - ref).cwiseAbs().maxCoeff() <= 1e-10 * ref.cwiseAbs().maxCoeff())) return false;
  // a full symmetric eigensolve with vectors
  const int m = 240;
  Eigen::MatrixXd s = probe_matrix(m, 2);
  s = (0.5 * (s + s.transpose())).eval();
  Eigen::MatrixXd v = s;
  std::vector<double> w(static_cast<std::size_t>(m));
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', m, v.data(), m, w.data()) != 0) return false;
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), m);
  const double resid = (s.lazyProduct(v) - v * wv.asDiagonal()).cwiseAbs().maxCoeff();
  const double orth = (v.transpose().lazyProduct(v) - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  return resid <= 1e-10 * s.cwiseAbs().maxCoeff() * m && orth <= 1e-10;
}

std::vector<double> dense_eigenvalues(Eigen::MatrixXd a, Eigen::MatrixXd* vectors) {
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 0) return w;
  if (!blas_reliable()) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, vectors ? Eigen::ComputeEigenvectors
                                                                        : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw FactorizationError("eigensolver did not converge");
    w.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    if (vectors) *vectors = es.eigenvectors();
    return w;
  }
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n, a.data(), n, w.data());
  if (info != 0) throw FactorizationError("dsyevd failed with info " + std::to_string(info));
  if (vectors) *vectors = std::move(a);
  return w;
}

// Band -> tridiagonal (orthogonal similarity). Returns false on LAPACK failure.
bool band_tridiagonalize(const SymmetricBandMatrix& h, std::vector<double>& d, std::vector<double>& e) {
  pin_blas_threads();
  const auto n = static_cast<lapack_int>(h.size());
  d.assign(h.size(), 0.0);
  e.assign(h.size() > 0 ? h.size() - 1 : 0, 0.0);
  if (n == 0) return true;
  if (h.bandwidth() == 0) {
    for (std::size_t i = 0; i < h.size(); ++i) d[i] = h.diagonal(i);
    return true;
  }
  if (h.bandwidth() == 1) {
    for (std::size_t i = 0; i < h.size(); ++i) d[i] = h.diagonal(i);
    for (std::size_t i = 0; i + 1 < h.size(); ++i) e[i] = h(i + 1, i);
    return true;
  }
  std::vector<double> ab(h.storage().begin(), h.storage().end());
  double q = 0.0;
  const auto kd = static_cast<lapack_int>(h.bandwidth());
  const lapack_int info = LAPACKE_dsbtrd(LAPACK_COL_MAJOR, 'N', 'L', n, kd, ab.data(), kd + 1, d.data(),
                                         e.empty() ? nullptr : e.data(), &q, 1);
  return info == 0;
}

// Inertia of H - lambda I via unpivoted band LDL^T. Returns false on (near) breakdown:
// a pivot below 1e-12 ||H|| or element growth large enough to spoil the sign count.
bool band_ldlt_count(const SymmetricBandMatrix& h, double lambda, long& negatives) {
  const std::size_t n = h.size();
  const std::size_t kd = h.bandwidth();
  const std::size_t ld = kd + 1;
  std::vector<double> a(h.storage().begin(), h.storage().end());
  for (std::size_t i = 0; i < n; ++i) a[i * ld] -= lambda;
  const double scale = std::max({h.inf_norm(), std::abs(lambda), DBL_MIN});
  const double pivot_floor = 1e-12 * scale;
  const double growth_limit = 1e4 * scale;
  long neg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double* col = a.data() + k * ld;
    const double d = col[0];
    if (!(std::abs(d) >= pivot_floor)) return false;
    if (d < 0.0) ++neg;
    const std::size_t last = std::min(n - 1, k + kd);
    for (std::size_t m = k + 1; m <= last; ++m) {
      const double cm = col[m - k];
      if (cm == 0.0) continue;
      const double f = cm / d;
      if (std::abs(f * cm) > growth_limit) return false;
      double* mcol = a.data() + m * ld;
      for (std::size_t i = m; i <= last; ++i) mcol[i - m] -= f * col[i - k];
    }
  }
  negatives = neg;
  return true;
}

}  // namespace

bool blas_reliable() {
  static const bool ok = probe_blas();
  return ok;
}

void relaunch_with_portable_blas(char** argv) {
  if (blas_reliable() || std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  setenv("OPENBLAS_CORETYPE", __builtin_cpu_supports("avx2") ? "Haswell" : "Prescott", 1);
  execv("/proc/self/exe", argv);
  // exec failed: carry on with the Eigen fallback
}

// ---------------------------------------------------------------------------
// Counting

long sturm_count(std::span<const double> diag, std::span<const double> offdiag, double lambda) {
  const std::size_t n = diag.size();
  if (n == 0) return 0;
  if (offdiag.size() + 1 != n) throw std::invalid_argument("sturm_count: off-diagonal length must be n - 1");
  double emax2 = 1.0;
  for (double e : offdiag) emax2 = std::max(emax2, e * e);
  const double pivmin = DBL_MIN * emax2;
  long count = 0;
  double q = diag[0] - lambda;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    q = diag[i] - lambda - offdiag[i - 1] * offdiag[i - 1] / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

CountResult count_below_detailed(const SymmetricBandMatrix& h, double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("count_below: lambda must be finite");
  const std::size_t n = h.size();
  if (n == 0) return {0, CountMethod::sturm};
  if (h.bandwidth() <= 1) {
    std::vector<double> d(n), e(n - 1);
    for (std::size_t i = 0; i < n; ++i) d[i] = h.diagonal(i);
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = h.bandwidth() == 1 ? h(i + 1, i) : 0.0;
    return {sturm_count(d, e, lambda), CountMethod::sturm};
  }
  long neg = 0;
  if (band_ldlt_count(h, lambda, neg)) return {neg, CountMethod::band_ldlt};
  std::vector<double> d, e;
  if (band_tridiagonalize(h, d, e)) return {sturm_count(d, e, lambda), CountMethod::tridiagonalized_sturm};
  const auto w = dense_eigenvalues(h.to_dense(), nullptr);
  return {static_cast<long>(std::lower_bound(w.begin(), w.end(), lambda) - w.begin()), CountMethod::dense_oracle};
}

long count_below(const SymmetricBandMatrix& h, double lambda) { return count_below_detailed(h, lambda).count; }

long count_below(const Eigen::MatrixXd& m, double lambda) {
  if (m.rows() != m.cols()) throw std::invalid_argument("count_below: matrix is not square");
  const auto n = static_cast<std::size_t>(m.rows());
  return count_below(SymmetricBandMatrix::from_dense(m, n == 0 ? 0 : n - 1), lambda);
}

double spectral_margin(const SymmetricBandMatrix& h) { return 1e-10 * std::max(h.inf_norm(), 1.0); }

bool is_off_spectrum(const SymmetricBandMatrix& h, double lambda, double margin) {
  return count_below(h, lambda - margin) == count_below(h, lambda + margin);
}

long SpectrumOracle::count_below(double lambda) const {
  return static_cast<long>(std::lower_bound(values.begin(), values.end(), lambda) - values.begin());
}

// ---------------------------------------------------------------------------
// Spectra

SpectrumOracle eig_all(const SymmetricBandMatrix& h, bool vectors, const SpectralLimits& limits) {
  const std::size_t n = h.size();
  SpectrumOracle out;
  if (vectors) {
    check_dense_limit(n, limits, "eig_all");
    Eigen::MatrixXd v;
    out.values = dense_eigenvalues(h.to_dense(), &v);
    out.vectors = std::move(v);
    return out;
  }
  if (h.bandwidth() <= 1 || (h.bandwidth() * 5 < n && blas_reliable())) {
    std::vector<double> d, e;
    if (!band_tridiagonalize(h, d, e)) throw FactorizationError("eig_all: band tridiagonalization failed");
    if (n > 0) {
      const lapack_int info =
          LAPACKE_dsterf(static_cast<lapack_int>(n), d.data(), e.empty() ? nullptr : e.data());
      if (info != 0) throw FactorizationError("dsterf failed with info " + std::to_string(info));
    }
    out.values = std::move(d);
    return out;
  }
  check_dense_limit(n, limits, "eig_all");
  out.values = dense_eigenvalues(h.to_dense(), nullptr);
  return out;
}

SpectrumOracle eig_all(const Eigen::MatrixXd& m, bool vectors, const SpectralLimits& limits) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eig_all: matrix is not square");
  check_dense_limit(static_cast<std::size_t>(m.rows()), limits, "eig_all");
  SpectrumOracle out;
  if (vectors) {
    Eigen::MatrixXd v;
    out.values = dense_eigenvalues(m, &v);
    out.vectors = std::move(v);
  } else {
    out.values = dense_eigenvalues(m, nullptr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral functions

SpectralFunction SpectralFunction::bump(double a, double b) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("bump: need finite a < b");
  SpectralFunction g;
  g.kind_ = Kind::bump;
  g.p0_ = a;
  g.p1_ = b;
  return g;
}

SpectralFunction SpectralFunction::exponential(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("exponential: t must be positive");
  SpectralFunction g;
  g.kind_ = Kind::exponential;
  g.p0_ = t;
  return g;
}

SpectralFunction SpectralFunction::resolvent_power(double e, int m) {
  if (!std::isfinite(e) || m < 1) throw std::invalid_argument("resolvent_power: need finite E and m >= 1");
  SpectralFunction g;
  g.kind_ = Kind::resolvent_power;
  g.p0_ = e;
  g.p1_ = m;
  return g;
}

SpectralFunction SpectralFunction::constant(double c) {
  SpectralFunction g;
  g.kind_ = Kind::constant;
  g.p0_ = c;
  return g;
}

double SpectralFunction::value(double lambda) const {
  switch (kind_) {
    case Kind::bump: {
      if (lambda <= p0_ || lambda >= p1_) return 0.0;
      const double r = 0.5 * (p1_ - p0_);
      const double u = (lambda - p0_) * (p1_ - lambda) / (r * r);
      return u * u * u;
    }
    case Kind::exponential:
      return std::exp(-p0_ * lambda);
    case Kind::resolvent_power:
      // infinite (rejected by callers) at or left of -E
      return lambda + p0_ > 0.0 ? std::pow(lambda + p0_, -p1_) : INFINITY;
    case Kind::constant:
      return p0_;
  }
  return 0.0;
}

double SpectralFunction::derivative(double lambda) const {
  switch (kind_) {
    case Kind::bump: {
      if (lambda <= p0_ || lambda >= p1_) return 0.0;
      const double r = 0.5 * (p1_ - p0_);
      const double u = (lambda - p0_) * (p1_ - lambda) / (r * r);
      const double du = (p0_ + p1_ - 2.0 * lambda) / (r * r);
      return 3.0 * u * u * du;
    }
    case Kind::exponential:
      return -p0_ * std::exp(-p0_ * lambda);
    case Kind::resolvent_power:
      return lambda + p0_ > 0.0 ? -p1_ * std::pow(lambda + p0_, -p1_ - 1.0) : INFINITY;
    case Kind::constant:
      return 0.0;
  }
  return 0.0;
}

double SpectralFunction::max_abs_derivative() const {
  switch (kind_) {
    case Kind::bump: {
      // |g'| peaks where (r^2 - u^2) = 4u^2, u = lambda - midpoint: 96 / (25 sqrt(5) r).
      const double r = 0.5 * (p1_ - p0_);
      return 96.0 / (25.0 * std::sqrt(5.0) * r);
    }
    case Kind::exponential:
    case Kind::resolvent_power:
      return INFINITY;  // unbounded on the real line
    case Kind::constant:
      return 0.0;
  }
  return 0.0;
}

std::pair<double, double> SpectralFunction::support() const {
  if (kind_ == Kind::bump) return {p0_, p1_};
  return {-INFINITY, INFINITY};
}

std::string SpectralFunction::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::bump:
      os << "bump(" << p0_ << "," << p1_ << ")";
      break;
    case Kind::exponential:
      os << "exp(-" << p0_ << "*l)";
      break;
    case Kind::resolvent_power:
      os << "(l+" << p0_ << ")^-" << p1_;
      break;
    case Kind::constant:
      os << "const(" << p0_ << ")";
      break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Traces

double heat_trace(std::span<const double> eigenvalues, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_trace: t must be positive");
  std::vector<double> terms(eigenvalues.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = std::exp(-t * eigenvalues[i]);
  return pairwise_sum(terms);
}

double heat_trace(const SymmetricBandMatrix& h, double t, const SpectralLimits& limits) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_trace: t must be positive");
  return heat_trace(eig_all(h, false, limits).values, t);
}

StochasticTrace heat_trace_stochastic(const SymmetricBandMatrix& h, double t, std::size_t probes,
                                      std::uint64_t seed) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_trace_stochastic: t must be positive");
  if (probes < 2) throw std::invalid_argument("heat_trace_stochastic: need at least two probes");
  const std::size_t n = h.size();
  const auto [lo, hi] = h.gershgorin();
  const double c = 0.5 * (lo + hi);
  const double r = std::max(0.5 * (hi - lo), 1e-300);
  const double z = t * r;
  const auto degree = static_cast<std::size_t>(std::ceil(1.5 * z + 40.0));
  const std::size_t nodes = 2 * degree;
  // Chebyshev coefficients of exp(-t (c + r x)) on [-1, 1] via Gauss-Chebyshev quadrature.
  std::vector<double> coef(degree + 1, 0.0);
  for (std::size_t k = 0; k <= degree; ++k) {
    std::vector<double> terms(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
      const double theta = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(nodes);
      terms[j] = std::exp(-t * (c + r * std::cos(theta))) * std::cos(static_cast<double>(k) * theta);
    }
    coef[k] = (k == 0 ? 1.0 : 2.0) * pairwise_sum(terms) / static_cast<double>(nodes);
  }
  std::size_t used = degree;
  const double cmax = std::abs(*std::max_element(coef.begin(), coef.end(),
                                                  [](double a, double b) { return std::abs(a) < std::abs(b); }));
  while (used > 1 && std::abs(coef[used]) < 1e-17 * cmax) --used;

  const auto key = derive_key(seed, rng_domain::kProbes);
  std::vector<double> samples(probes);
  std::vector<double> zv(n), t0(n), t1(n), t2(n), tmp(n), acc(n);
  for (std::size_t p = 0; p < probes; ++p) {
    for (std::size_t blk = 0; blk * 128 < n; ++blk) {
      const auto bits = Philox4x32::generate(
          {static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(blk), 0u, 0u}, key);
      for (std::size_t b = 0; b < 128 && blk * 128 + b < n; ++b)
        zv[blk * 128 + b] = ((bits[b / 32] >> (b % 32)) & 1u) ? 1.0 : -1.0;
    }
    // T_0 z = z, T_1 z = X z with X = (H - c)/r, T_{k+1} = 2 X T_k - T_{k-1}.
    t0 = zv;
    for (std::size_t i = 0; i < n; ++i) acc[i] = coef[0] * t0[i];
    h.multiply(t0, tmp);
    for (std::size_t i = 0; i < n; ++i) {
      t1[i] = (tmp[i] - c * t0[i]) / r;
      acc[i] += coef[1] * t1[i];
    }
    for (std::size_t k = 2; k <= used; ++k) {
      h.multiply(t1, tmp);
      for (std::size_t i = 0; i < n; ++i) {
        t2[i] = 2.0 * (tmp[i] - c * t1[i]) / r - t0[i];
        acc[i] += coef[k] * t2[i];
      }
      std::swap(t0, t1);
      std::swap(t1, t2);
    }
    std::vector<double> dots(n);
    for (std::size_t i = 0; i < n; ++i) dots[i] = zv[i] * acc[i];
    samples[p] = pairwise_sum(dots);
  }
  const auto stats = sample_stats(samples);
  StochasticTrace out;
  out.estimate = stats.mean;
  out.standard_error = std::sqrt(stats.variance / static_cast<double>(probes));
  out.probes = probes;
  out.chebyshev_degree = used;
  return out;
}

Eigen::MatrixXd apply_function(const SpectrumOracle& oracle, const SpectralFunction& g) {
  if (!oracle.vectors) throw std::invalid_argument("apply_function: oracle carries no eigenvectors");
  const Eigen::MatrixXd& v = *oracle.vectors;
  Eigen::VectorXd gv(static_cast<Eigen::Index>(oracle.size()));
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    const double x = g.value(oracle.values[i]);
    if (!std::isfinite(x)) throw std::domain_error("apply_function: g is not finite on the spectrum");
    gv[static_cast<Eigen::Index>(i)] = x;
  }
  const Eigen::MatrixXd m = v * gv.asDiagonal() * v.transpose();
  // exact symmetry, so the result can be counted and factored as a symmetric matrix
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd apply_function(const SymmetricBandMatrix& h, const SpectralFunction& g, const SpectralLimits& limits) {
  return apply_function(eig_all(h, true, limits), g);
}

Eigen::VectorXd function_diagonal(const SpectrumOracle& oracle, const SpectralFunction& g) {
  if (!oracle.vectors) throw std::invalid_argument("function_diagonal: oracle carries no eigenvectors");
  const Eigen::MatrixXd& v = *oracle.vectors;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(v.rows());
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    const double x = g.value(oracle.values[k]);
    if (!std::isfinite(x)) throw std::domain_error("function_diagonal: g is not finite on the spectrum");
    if (x == 0.0) continue;
    diag += x * v.col(static_cast<Eigen::Index>(k)).cwiseAbs2();
  }
  return diag;
}

Eigen::MatrixXd heat_semigroup(const SymmetricBandMatrix& h, double t, const SpectralLimits& limits) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_semigroup: t must be positive");
  return apply_function(h, SpectralFunction::exponential(t), limits);
}

double partial_trace(const Eigen::MatrixXd& m, std::span<const std::size_t> sites) {
  std::vector<double> terms;
  terms.reserve(sites.size());
  for (std::size_t s : sites) {
    if (s >= static_cast<std::size_t>(m.rows()) || s >= static_cast<std::size_t>(m.cols()))
      throw std::out_of_range("partial_trace: site index out of range");
    terms.push_back(m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)));
  }
  return pairwise_sum(terms);
}

double partial_trace(const Eigen::VectorXd& diagonal, std::span<const std::size_t> sites) {
  std::vector<double> terms;
  terms.reserve(sites.size());
  for (std::size_t s : sites) {
    if (s >= static_cast<std::size_t>(diagonal.size())) throw std::out_of_range("partial_trace: site index out of range");
    terms.push_back(diagonal[static_cast<Eigen::Index>(s)]);
  }
  return pairwise_sum(terms);
}

double trace_norm(const Eigen::MatrixXd& m, const SpectralLimits& limits) {
  check_dense_limit(static_cast<std::size_t>(std::max(m.rows(), m.cols())), limits, "trace_norm");
  std::vector<double> sv;
  if (m.rows() == m.cols() && m == m.transpose()) {
    sv = dense_eigenvalues(m, nullptr);
    for (double& x : sv) x = std::abs(x);
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    sv.assign(s.data(), s.data() + s.size());
  }
  std::sort(sv.begin(), sv.end());
  return pairwise_sum(sv);
}

double supnorm_rows(const Eigen::MatrixXd& m) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).cwiseAbs().sum());
  return best;
}

}  // namespace ssflab
