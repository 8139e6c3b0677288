#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ssflab {

// Real symmetric band matrix in LAPACK lower band storage:
// element (i, j), j <= i <= j + kd, lives at data[j * (kd + 1) + (i - j)].
class SymmetricBandMatrix {
 public:
  SymmetricBandMatrix() = default;
  SymmetricBandMatrix(std::size_t n, std::size_t bandwidth);

  static SymmetricBandMatrix from_dense(const Eigen::MatrixXd& m);
  static SymmetricBandMatrix from_dense(const Eigen::MatrixXd& m, std::size_t bandwidth);

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return kd_; }

  // Zero outside the band.
  double operator()(std::size_t i, std::size_t j) const;
  // Sets both (i, j) and (j, i); throws if |i - j| exceeds the bandwidth.
  void set(std::size_t i, std::size_t j, double value);

  double diagonal(std::size_t i) const { return data_[i * (kd_ + 1)]; }

  Eigen::MatrixXd to_dense() const;
  void multiply(std::span<const double> x, std::span<double> y) const;

  // Maximum absolute row sum; this is also the Gershgorin radius bound on |eig|.
  double inf_norm() const;
  // Gershgorin enclosure [lower, upper] of the spectrum.
  std::pair<double, double> gershgorin() const;

  std::span<const double> storage() const { return data_; }
  std::span<double> storage() { return data_; }
  std::size_t leading_dimension() const { return kd_ + 1; }

  friend bool operator==(const SymmetricBandMatrix&, const SymmetricBandMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t kd_ = 0;
  std::vector<double> data_;
};

}  // namespace ssflab
