#include "ssflab/band_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssflab {

SymmetricBandMatrix::SymmetricBandMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), kd_(n == 0 ? 0 : std::min(bandwidth, n - 1)), data_(n * (kd_ + 1), 0.0) {}

SymmetricBandMatrix SymmetricBandMatrix::from_dense(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("from_dense: matrix is not square");
  const auto n = static_cast<std::size_t>(m.rows());
  std::size_t kd = 0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i)
      if (m(i, j) != 0.0 || m(j, i) != 0.0) kd = std::max(kd, i - j);
  return from_dense(m, kd);
}

SymmetricBandMatrix SymmetricBandMatrix::from_dense(const Eigen::MatrixXd& m, std::size_t bandwidth) {
  if (m.rows() != m.cols()) throw std::invalid_argument("from_dense: matrix is not square");
  const auto n = static_cast<std::size_t>(m.rows());
  SymmetricBandMatrix b(n, bandwidth);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = j; i < n; ++i) {
      if (m(i, j) != m(j, i)) throw std::invalid_argument("from_dense: matrix is not symmetric");
      if (i - j > b.kd_) {
        if (m(i, j) != 0.0) throw std::invalid_argument("from_dense: entry outside the requested band");
        continue;
      }
      b.data_[j * (b.kd_ + 1) + (i - j)] = m(i, j);
    }
  }
  return b;
}

double SymmetricBandMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i < j) std::swap(i, j);
  if (i - j > kd_) return 0.0;
  return data_[j * (kd_ + 1) + (i - j)];
}

void SymmetricBandMatrix::set(std::size_t i, std::size_t j, double value) {
  if (i >= n_ || j >= n_) throw std::out_of_range("SymmetricBandMatrix::set: index out of range");
  if (i < j) std::swap(i, j);
  if (i - j > kd_) throw std::out_of_range("SymmetricBandMatrix::set: outside band");
  data_[j * (kd_ + 1) + (i - j)] = value;
}

Eigen::MatrixXd SymmetricBandMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t last = std::min(n_ - 1, j + kd_);
    for (std::size_t i = j; i <= last; ++i) {
      const double v = data_[j * (kd_ + 1) + (i - j)];
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return m;
}

void SymmetricBandMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_ || y.size() != n_) throw std::invalid_argument("multiply: size mismatch");
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const double* col = data_.data() + j * (kd_ + 1);
    y[j] += col[0] * x[j];
    const std::size_t last = std::min(n_ - 1, j + kd_);
    for (std::size_t i = j + 1; i <= last; ++i) {
      const double a = col[i - j];
      y[i] += a * x[j];
      y[j] += a * x[i];
    }
  }
}

double SymmetricBandMatrix::inf_norm() const {
  std::vector<double> rows(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const double* col = data_.data() + j * (kd_ + 1);
    rows[j] += std::abs(col[0]);
    const std::size_t last = std::min(n_ - 1, j + kd_);
    for (std::size_t i = j + 1; i <= last; ++i) {
      rows[i] += std::abs(col[i - j]);
      rows[j] += std::abs(col[i - j]);
    }
  }
  return rows.empty() ? 0.0 : *std::max_element(rows.begin(), rows.end());
}

std::pair<double, double> SymmetricBandMatrix::gershgorin() const {
  if (n_ == 0) return {0.0, 0.0};
  std::vector<double> radius(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const double* col = data_.data() + j * (kd_ + 1);
    const std::size_t last = std::min(n_ - 1, j + kd_);
    for (std::size_t i = j + 1; i <= last; ++i) {
      radius[i] += std::abs(col[i - j]);
      radius[j] += std::abs(col[i - j]);
    }
  }
  double lo = diagonal(0) - radius[0];
  double hi = diagonal(0) + radius[0];
  for (std::size_t i = 1; i < n_; ++i) {
    lo = std::min(lo, diagonal(i) - radius[i]);
    hi = std::max(hi, diagonal(i) + radius[i]);
  }
  return {lo, hi};
}

}  // namespace ssflab
