#include "losvm/kernel.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace losvm {

namespace {

void require_positive_variance(double var) {
  if (!(var > 0.0)) throw std::invalid_argument("bandwidth heuristic requires var > 0");
}

void require_counts(std::size_t n, std::size_t d) {
  if (n < 1 || d < 1) throw std::invalid_argument("bandwidth heuristic requires n >= 1 and d >= 1");
}

}  // namespace

Kernel Kernel::rbf(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("RBF gamma must be positive");
  return {KernelType::rbf, gamma};
}

double gamma_scott(std::size_t n, std::size_t d, double var) {
  require_counts(n, d);
  require_positive_variance(var);
  const double dd = static_cast<double>(d);
  return 0.5 * std::pow(static_cast<double>(n), 2.0 / (dd + 4.0)) / var;
}

double gamma_sklearn(std::size_t d, double var) {
  require_counts(1, d);
  require_positive_variance(var);
  return 1.0 / (static_cast<double>(d) * var);
}

double gamma_silverman(std::size_t n, std::size_t d, double var) {
  require_counts(n, d);
  require_positive_variance(var);
  const double dd = static_cast<double>(d);
  // (d + 2) / 4 is exactly 1 for d = 2, so this reduces to Scott's rule there.
  const double base = static_cast<double>(n) * ((dd + 2.0) / 4.0);
  return 0.5 * std::pow(base, 2.0 / (dd + 4.0)) / var;
}

double gamma_from_sigma(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return 1.0 / (2.0 * sigma * sigma);
}

double sigma_from_gamma(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  return std::sqrt(1.0 / (2.0 * gamma));
}

KernelContext::KernelContext(const DataMatrix& data, Kernel kernel, CacheOptions cache)
    : KernelContext(data.points, data.ids, kernel, cache) {}

KernelContext::KernelContext(PointMatrix points, IdVector ids, Kernel kernel, CacheOptions cache)
    : points_(std::move(points)), ids_(std::move(ids)), kernel_(kernel), cache_(cache) {
  const std::size_t n = size();
  if (n == 0) throw std::invalid_argument("KernelContext requires at least one point");
  if (ids_.empty()) {
    ids_.resize(n);
    std::iota(ids_.begin(), ids_.end(), 0);
  }
  if (ids_.size() != n) throw std::invalid_argument("KernelContext: ids/points size mismatch");
  active_size_ = n;
  original_at_.resize(n);
  std::iota(original_at_.begin(), original_at_.end(), 0);
  pos_of_original_ = original_at_;
  diag_.resize(n);
  for (std::size_t i = 0; i < n; ++i) diag_[i] = kernel_(point(i), point(i));

  const std::size_t row_bytes = n * sizeof(double);
  max_rows_ = std::clamp<std::size_t>(cache_.budget_bytes / row_bytes, 2, n);
  if (cache_.enabled) {
    rows_.resize(n);
    stamp_.resize(n, 0);
  } else {
    scratch_[0].resize(n);
    scratch_[1].resize(n);
  }
}

void KernelContext::set_active_size(std::size_t n) {
  if (n > size()) throw std::out_of_range("active size exceeds number of points");
  active_size_ = n;
}

double KernelContext::kernel_eval(std::size_t i, std::size_t j) {
  if (i >= active_size_ || j >= active_size_) {
    throw std::out_of_range("kernel_eval index outside the active set: (" + std::to_string(i) + ", " +
                            std::to_string(j) + "), active size " + std::to_string(active_size_));
  }
  if (cache_.enabled && !rows_[i].empty()) {
    touch(i);
    return rows_[i][j];
  }
  return kernel_(point(i), point(j));
}

void KernelContext::compute_row(std::size_t i, std::vector<double>& out) const {
  const std::size_t n = size();
  out.resize(n);
  const auto xi = point(i);
  for (std::size_t j = 0; j < n; ++j) out[j] = kernel_(xi, point(j));
  out[i] = diag_[i];
}

void KernelContext::touch(std::size_t i) { stamp_[i] = ++clock_; }

std::span<const double> KernelContext::row(std::size_t i) {
  if (i >= size()) throw std::out_of_range("kernel row index out of range");
  if (!cache_.enabled) {
    auto& buf = scratch_[scratch_next_];
    scratch_next_ ^= 1;
    compute_row(i, buf);
    ++computed_rows_;
    return buf;
  }
  if (!rows_[i].empty()) {
    touch(i);
    return rows_[i];
  }
  if (cached_.size() >= max_rows_) {
    auto oldest = std::min_element(cached_.begin(), cached_.end(),
                                   [&](std::size_t a, std::size_t b) { return stamp_[a] < stamp_[b]; });
    std::vector<double>().swap(rows_[*oldest]);
    stamp_[*oldest] = 0;
    *oldest = cached_.back();
    cached_.pop_back();
  }
  compute_row(i, rows_[i]);
  ++computed_rows_;
  cached_.push_back(i);
  touch(i);
  return rows_[i];
}

void KernelContext::swap(std::size_t i, std::size_t j) {
  if (i >= size() || j >= size()) throw std::out_of_range("swap index out of range");
  if (i == j) return;
  points_.row(static_cast<Eigen::Index>(i)).swap(points_.row(static_cast<Eigen::Index>(j)));
  std::swap(ids_[i], ids_[j]);
  std::swap(diag_[i], diag_[j]);
  std::swap(original_at_[i], original_at_[j]);
  pos_of_original_[original_at_[i]] = i;
  pos_of_original_[original_at_[j]] = j;
  if (!cache_.enabled) return;

  std::swap(rows_[i], rows_[j]);
  std::swap(stamp_[i], stamp_[j]);
  for (std::size_t& r : cached_) {
    if (r == i) r = j;
    else if (r == j) r = i;
    std::swap(rows_[r][i], rows_[r][j]);
  }
}

}  // namespace losvm
