#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssflab/band_matrix.hpp"
#include "ssflab/spectral.hpp"

namespace ssflab {

class OnSpectrumError : public std::runtime_error {
 public:
  OnSpectrumError(const std::string& what, double lambda) : std::runtime_error(what), lambda_(lambda) {}
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

// Energies certified off the spectra of a set of operators.
struct EnergyGrid {
  std::vector<double> lambdas;
  // Certified lower bound on the distance of each energy to the spectra.
  std::vector<double> distance;
  bool exact = true;
};

// Validates a strictly increasing energy list and certifies every point by counting.
// Throws OnSpectrumError for the first energy closer than 1e-10 ||H|| to a spectrum.
// With widen = false the recorded distance is the base margin only (two counts per point).
EnergyGrid certify_energies(std::span<const double> lambdas, std::span<const SymmetricBandMatrix* const> operators,
                            bool widen = true);

// `count` energies spread over [lo, hi]; points that sit on a spectrum are nudged by a few
// margins until certified.
EnergyGrid off_spectrum_grid(double lo, double hi, std::size_t count,
                             std::span<const SymmetricBandMatrix* const> operators);

// Same construction certified against precomputed ascending spectra: every returned
// energy is farther than `margin` from each eigenvalue. Suited to dense in-band grids,
// where one eigensolve per operator is cheaper than repeated shifted factorizations.
EnergyGrid off_spectrum_grid_sorted(double lo, double hi, std::size_t count,
                                    std::span<const std::vector<double>* const> spectra, double margin);

// xi from two ascending spectra at energies certified by off_spectrum_grid_sorted.
std::vector<long> ssf_from_spectra(std::span<const double> eig_h, std::span<const double> eig_h0,
                                   std::span<const double> lambdas);

enum class Normalization { raw, per_volume, per_area };
std::string to_string(Normalization n);

// xi(lambda) = N(lambda; H0) - N(lambda; H).
struct SSFSample {
  std::vector<double> lambdas;
  std::vector<long> xi;
  Normalization normalization = Normalization::raw;
  double measure = 1.0;
  std::string pair_id;

  double normalized(std::size_t i) const { return static_cast<double>(xi[i]) / measure; }
};

SSFSample ssf_counting(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, std::span<const double> lambdas,
                       const std::string& pair_id = "");

SSFSample normalize(const SSFSample& sample, double measure, Normalization mode = Normalization::per_volume);

// CSV with columns lambda,xi_raw,xi_normalized,normalization,pair_id.
void write_ssf_csv(std::ostream& os, const SSFSample& sample);

// Where the step-function integral reads xi from: fresh counts on the matrices, or binary
// search in the two spectra.
enum class CountingSource { matrices, spectra };

// Exact integral of G'(lambda) xi(lambda) over the real line, with xi piecewise constant
// between the sorted union of both spectra: sum_k xi_k (G(p_{k+1}) - G(p_k)).
double step_integral(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, std::span<const double> eig_h,
                     std::span<const double> eig_h0, const std::function<double(double)>& primitive,
                     CountingSource source);

struct BirmanKreinResult {
  double trace_difference = 0.0;   // tr(g(H) - g(H0)) from the spectra
  double step_integral = 0.0;      // int g' xi, exact step integral
  double residual = 0.0;
  double tolerance = 0.0;          // 1e-8 n max|g'|
  bool support_outside_spectra = false;
};

BirmanKreinResult birman_krein_residual(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0,
                                        const SpectralFunction& g, const SpectralLimits& limits = {},
                                        CountingSource source = CountingSource::matrices);

struct LaplaceResult {
  double trace_difference = 0.0;  // tr(exp(-tH) - exp(-tH0))
  double step_integral = 0.0;     // -t int exp(-lambda t) xi(lambda) dlambda
  double relative_difference = 0.0;
};

LaplaceResult laplace_functional(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0, double t,
                                 const SpectralLimits& limits = {},
                                 CountingSource source = CountingSource::matrices);
// Same identity from precomputed spectra (no matrix access).
LaplaceResult laplace_functional(std::span<const double> eig_h, std::span<const double> eig_h0, double t);

// -xi(exp(-t lambda); exp(-tH), exp(-tH0)) by counting on the semigroup matrices.
std::vector<long> ssf_via_semigroup(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0,
                                    std::span<const double> lambdas, double t, const SpectralLimits& limits = {});

}  // namespace ssflab
