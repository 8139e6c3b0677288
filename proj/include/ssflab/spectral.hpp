#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssflab/band_matrix.hpp"

namespace ssflab {

class SizeLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Whether the linked BLAS/LAPACK passes a one-time numerical probe (a level-3 product and
// a symmetric eigensolve checked against Eigen's own kernels). When it fails, dense
// eigensolves use Eigen instead.
bool blas_reliable();

// For executables: if the probe fails and OPENBLAS_CORETYPE is unset, re-executes the
// current process with a conservative kernel selection. Returns only when no relaunch
// happened.
void relaunch_with_portable_blas(char** argv);

struct SpectralLimits {
  // Maximum order of any full-storage eigensolve. Eigenvalue-only solves of band matrices
  // go through band tridiagonalization and are not bound by it.
  std::size_t dense_limit = 4000;
};

// ---------------------------------------------------------------------------
// Eigenvalue counting

enum class CountMethod { sturm, band_ldlt, tridiagonalized_sturm, dense_oracle };

struct CountResult {
  long count = 0;
  CountMethod method = CountMethod::sturm;
};

// Number of eigenvalues strictly below lambda. Tridiagonal matrices use a Sturm sequence;
// wider bands use the inertia of an unpivoted LDL^T of H - lambda I, falling back to a
// tridiagonal reduction plus Sturm count, and finally to the dense oracle.
CountResult count_below_detailed(const SymmetricBandMatrix& h, double lambda);
long count_below(const SymmetricBandMatrix& h, double lambda);
// General symmetric matrix (stored densely).
long count_below(const Eigen::MatrixXd& m, double lambda);

// Sturm count for the tridiagonal (diag, offdiag) pair.
long sturm_count(std::span<const double> diag, std::span<const double> offdiag, double lambda);

// Whether no eigenvalue lies within `margin` of lambda (certified by counting).
bool is_off_spectrum(const SymmetricBandMatrix& h, double lambda, double margin);
// Default margin used for "exact" energy grids: 1e-10 * ||H||.
double spectral_margin(const SymmetricBandMatrix& h);

// ---------------------------------------------------------------------------
// Full spectrum

struct SpectrumOracle {
  std::vector<double> values;                // ascending
  std::optional<Eigen::MatrixXd> vectors;    // columns are eigenvectors

  std::size_t size() const { return values.size(); }
  long count_below(double lambda) const;
};

SpectrumOracle eig_all(const SymmetricBandMatrix& h, bool vectors = false, const SpectralLimits& limits = {});
SpectrumOracle eig_all(const Eigen::MatrixXd& m, bool vectors = false, const SpectralLimits& limits = {});

// ---------------------------------------------------------------------------
// Spectral functions g

// Built-in smooth test functions: C^2 bumps ((l-a)(b-l))^3 / r^6 on [a, b] (peak value 1,
// r = (b-a)/2), heat factors exp(-t l), resolvent powers (l + E)^-m, and constants.
class SpectralFunction {
 public:
  enum class Kind { bump, exponential, resolvent_power, constant };

  static SpectralFunction bump(double a, double b);
  static SpectralFunction exponential(double t);
  static SpectralFunction resolvent_power(double e, int m);
  static SpectralFunction constant(double c);

  Kind kind() const { return kind_; }
  double value(double lambda) const;
  double derivative(double lambda) const;
  // sup |g'|, closed form.
  double max_abs_derivative() const;
  // [a, b] for bumps; the whole line otherwise.
  std::pair<double, double> support() const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::constant;
  double p0_ = 0.0;
  double p1_ = 0.0;
};

// ---------------------------------------------------------------------------
// Traces, semigroups and norms

double heat_trace(std::span<const double> eigenvalues, double t);
double heat_trace(const SymmetricBandMatrix& h, double t, const SpectralLimits& limits = {});

struct StochasticTrace {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t probes = 0;
  std::size_t chebyshev_degree = 0;
};

// Hutchinson estimator with Rademacher probes; exp(-tH) z is applied through a Chebyshev
// expansion on the Gershgorin interval, accurate to roughly machine precision.
StochasticTrace heat_trace_stochastic(const SymmetricBandMatrix& h, double t, std::size_t probes,
                                      std::uint64_t seed);

Eigen::MatrixXd heat_semigroup(const SymmetricBandMatrix& h, double t, const SpectralLimits& limits = {});

// g(H) = sum g(l_i) v_i v_i^T; the oracle must carry eigenvectors.
Eigen::MatrixXd apply_function(const SpectrumOracle& oracle, const SpectralFunction& g);
Eigen::MatrixXd apply_function(const SymmetricBandMatrix& h, const SpectralFunction& g,
                               const SpectralLimits& limits = {});
// Diagonal of g(H) only.
Eigen::VectorXd function_diagonal(const SpectrumOracle& oracle, const SpectralFunction& g);

// tr(chi_Lambda M) for the listed sites.
double partial_trace(const Eigen::MatrixXd& m, std::span<const std::size_t> sites);
double partial_trace(const Eigen::VectorXd& diagonal, std::span<const std::size_t> sites);

// Sum of singular values.
double trace_norm(const Eigen::MatrixXd& m, const SpectralLimits& limits = {});
// Maximum absolute row sum (the infinity -> infinity operator norm).
double supnorm_rows(const Eigen::MatrixXd& m);

}  // namespace ssflab
