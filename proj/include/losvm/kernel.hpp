#ifndef LOSVM_KERNEL_HPP
#define LOSVM_KERNEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "losvm/dataset.hpp"

namespace losvm {

/// Squared Euclidean distance summed in index order. Plain loop so the result
/// does not depend on operand alignment, which changes when rows are swapped.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Scalar sum(0);
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const Scalar diff = a.coeff(k) - b.coeff(k);
    sum += diff * diff;
  }
  return sum;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dot_product(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Scalar sum(0);
  for (Eigen::Index k = 0; k < a.size(); ++k) sum += a.coeff(k) * b.coeff(k);
  return sum;
}

enum class KernelType {
  rbf,
  linear,  // test-only: gives closed-form SVDD solutions
};

struct Kernel {
  KernelType type = KernelType::rbf;
  double gamma = 1.0;

  static Kernel rbf(double gamma);
  static Kernel linear() { return {KernelType::linear, 0.0}; }

  template <typename DerivedA, typename DerivedB>
  double operator()(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y) const {
    if (type == KernelType::linear) return dot_product(x, y);
    return std::exp(-gamma * squared_distance(x, y));
  }
};

// Bandwidth rules of thumb, converted from sigma to gamma = 1 / (2 sigma^2).
double gamma_scott(std::size_t n, std::size_t d, double var);
double gamma_sklearn(std::size_t d, double var);
double gamma_silverman(std::size_t n, std::size_t d, double var);
double gamma_from_sigma(double sigma);
double sigma_from_gamma(double gamma);

struct CacheOptions {
  bool enabled = true;
  std::size_t budget_bytes = std::size_t{256} << 20;
};

/// Kernel matrix access over a point set that can be reordered and logically
/// truncated. Rows cover all N positions so that points swapped behind the
/// active boundary stay addressable. Cached rows follow swaps by exchanging
/// the row slots and the two affected columns of every cached row.
///
/// A span returned by row() stays valid until the next call to row() that
/// misses twice, i.e. the two most recently requested rows are always live.
class KernelContext {
 public:
  KernelContext(const DataMatrix& data, Kernel kernel, CacheOptions cache = {});
  KernelContext(PointMatrix points, IdVector ids, Kernel kernel, CacheOptions cache = {});

  const Kernel& kernel() const { return kernel_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t active_size() const { return active_size_; }
  void set_active_size(std::size_t n);

  /// K(x_i, x_j) for active positions; throws std::out_of_range otherwise.
  double kernel_eval(std::size_t i, std::size_t j);

  /// Kernel row of position i over all N positions.
  std::span<const double> row(std::size_t i);

  /// K(x_i, x_i).
  double diag(std::size_t i) const { return diag_[i]; }

  /// Exchanges positions i and j (any positions < N).
  void swap(std::size_t i, std::size_t j);

  auto point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }
  const PointMatrix& points() const { return points_; }
  std::int64_t id_at(std::size_t i) const { return ids_[i]; }
  const IdVector& ids() const { return ids_; }
  /// Current position of the point with original index `original` (construction order).
  std::size_t position_of_original(std::size_t original) const { return pos_of_original_[original]; }
  std::size_t original_at(std::size_t i) const { return original_at_[i]; }

  bool cache_enabled() const { return cache_.enabled; }
  std::size_t cache_capacity_rows() const { return max_rows_; }
  std::size_t cached_rows() const { return cached_.size(); }
  std::uint64_t row_computations() const { return computed_rows_; }

 private:
  void compute_row(std::size_t i, std::vector<double>& out) const;
  void touch(std::size_t i);

  PointMatrix points_;
  IdVector ids_;
  std::vector<std::size_t> original_at_;
  std::vector<std::size_t> pos_of_original_;
  std::vector<double> diag_;
  Kernel kernel_;
  CacheOptions cache_;
  std::size_t active_size_;
  std::size_t max_rows_;

  // LRU by use stamp; plain values so the context copies and moves safely.
  std::vector<std::vector<double>> rows_;
  std::vector<std::uint64_t> stamp_;
  std::vector<std::size_t> cached_;  // positions holding a row, unordered
  std::uint64_t clock_ = 0;

  // Cache-disabled mode alternates between two scratch rows.
  std::vector<double> scratch_[2];
  std::size_t scratch_next_ = 0;
  std::uint64_t computed_rows_ = 0;
};

}  // namespace losvm

#endif  // LOSVM_KERNEL_HPP
