#include "losvm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace losvm {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

std::string to_string(Variant v) { return v == Variant::ocsvm ? "ocsvm" : "svdd"; }

Variant parse_variant(const std::string& name) {
  if (name == "ocsvm") return Variant::ocsvm;
  if (name == "svdd") return Variant::svdd;
  throw std::invalid_argument("unknown variant '" + name + "' (expected ocsvm or svdd)");
}

ConvergenceError::ConvergenceError(double gap, std::uint64_t iterations)
    : std::runtime_error("solver did not converge after " + std::to_string(iterations) +
                         " pair updates (KKT gap " + std::to_string(gap) + ")"),
      gap_(gap),
      iterations_(iterations) {}

std::vector<std::size_t> SvmModel::sv_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < active_size; ++i)
    if (alpha[ix(i)] > 0.0) out.push_back(i);
  return out;
}

double linear_term(Variant v, const KernelContext& ctx, std::size_t i) {
  return v == Variant::svdd ? ctx.diag(i) : 0.0;
}

SvmModel train(KernelContext& ctx, Variant variant, double C, const SolverOptions& opts, SolveStats* stats) {
  const std::size_t n = ctx.active_size();
  if (n == 0) throw std::invalid_argument("train requires a non-empty active set");
  if (!(opts.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(C > 0.0) || C * static_cast<double>(n) < 1.0 - 1e-12) {
    throw std::invalid_argument("infeasible box: C * N = " + std::to_string(C * static_cast<double>(n)) +
                                " < 1");
  }

  SvmModel m;
  m.variant = variant;
  m.C = C;
  m.active_size = n;
  m.alpha = Eigen::VectorXd::Zero(ix(ctx.size()));
  m.alpha.head(ix(n)).setConstant(std::min(C, 1.0 / static_cast<double>(n)));
  m.gradient = Eigen::VectorXd::Zero(ix(ctx.size()));
  m.gradient.head(ix(n)) = full_gradient(m, ctx);

  const SolveStats s = optimize(m, ctx, opts);
  if (stats) *stats = s;
  return m;
}

double kkt_gap(const SvmModel& m) {
  double gmax = -std::numeric_limits<double>::infinity();
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m.active_size; ++t) {
    const double a = m.alpha[ix(t)];
    const double g = m.gradient[ix(t)];
    if (a > 0.0) gmax = std::max(gmax, g);
    if (a < m.C) gmin = std::min(gmin, g);
  }
  if (!std::isfinite(gmax) || !std::isfinite(gmin)) return 0.0;
  return std::max(0.0, gmax - gmin);
}

std::optional<std::pair<std::size_t, std::size_t>> select_violating_pair(const SvmModel& m, double eps) {
  double gmax = -std::numeric_limits<double>::infinity();
  double gmin = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  std::size_t k = 0;
  bool have_i = false;
  bool have_k = false;
  for (std::size_t t = 0; t < m.active_size; ++t) {
    const double a = m.alpha[ix(t)];
    const double g = m.gradient[ix(t)];
    if (a > 0.0 && g > gmax) {
      gmax = g;
      i = t;
      have_i = true;
    }
    if (a < m.C && g < gmin) {
      gmin = g;
      k = t;
      have_k = true;
    }
  }
  if (!have_i || !have_k || i == k || gmax - gmin <= eps) return std::nullopt;
  return std::pair{i, k};
}

void update_gradient(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t k, double old_i,
                     double new_i, double old_k, double new_k) {
  const double di = new_i - old_i;
  const double dk = new_k - old_k;
  const auto n = m.active_size;
  double* g = m.gradient.data();
  if (di != 0.0 && dk != 0.0) {
    const auto row_i = ctx.row(i);
    const auto row_k = ctx.row(k);
    for (std::size_t j = 0; j < n; ++j) g[j] += row_i[j] * di + row_k[j] * dk;
  } else if (di != 0.0) {
    const auto row_i = ctx.row(i);
    for (std::size_t j = 0; j < n; ++j) g[j] += row_i[j] * di;
  } else if (dk != 0.0) {
    const auto row_k = ctx.row(k);
    for (std::size_t j = 0; j < n; ++j) g[j] += row_k[j] * dk;
  }
}

bool smo_step(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t k, double tau) {
  const double ai = m.alpha[ix(i)];
  const double ak = m.alpha[ix(k)];
  const double C = m.C;
  const auto row_i = ctx.row(i);
  const double curvature = std::max(tau, ctx.diag(i) + ctx.diag(k) - 2.0 * row_i[k]);
  double delta = (m.gradient[ix(i)] - m.gradient[ix(k)]) / curvature;
  delta = std::min({delta, ai, C - ak});
  if (!(delta > 0.0)) return false;

  double new_i;
  double new_k;
  if (delta >= ai) {
    new_i = 0.0;
    new_k = std::min(C, ak + ai);
  } else if (delta >= C - ak) {
    new_k = C;
    new_i = ai - (C - ak);
  } else {
    new_i = ai - delta;
    new_k = ak + delta;
  }
  m.alpha[ix(i)] = new_i;
  m.alpha[ix(k)] = new_k;
  update_gradient(m, ctx, i, k, ai, new_i, ak, new_k);
  return true;
}

SolveStats optimize(SvmModel& m, KernelContext& ctx, const SolverOptions& opts) {
  if (m.active_size != ctx.active_size()) throw std::logic_error("model and kernel context disagree on active size");
  SolveStats stats;
  m.converged = false;
  while (true) {
    const auto pair = select_violating_pair(m, opts.eps);
    if (!pair) break;
    if (stats.iterations >= opts.max_iter) throw ConvergenceError(kkt_gap(m), stats.iterations);
    if (!smo_step(m, ctx, pair->first, pair->second, opts.tau)) throw ConvergenceError(kkt_gap(m), stats.iterations);
    ++stats.iterations;
  }
  stats.gap = kkt_gap(m);
  m.converged = true;
  update_offset(m, ctx);
  return stats;
}

Eigen::VectorXd full_gradient(const SvmModel& m, KernelContext& ctx) {
  const std::size_t n = m.active_size;
  Eigen::VectorXd g(ix(n));
  for (std::size_t j = 0; j < n; ++j) g[ix(j)] = -0.5 * linear_term(m.variant, ctx, j);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = m.alpha[ix(i)];
    if (a == 0.0) continue;
    const auto row = ctx.row(i);
    for (std::size_t j = 0; j < n; ++j) g[ix(j)] += a * row[j];
  }
  return g;
}

double dual_objective(const SvmModel& m, KernelContext& ctx) {
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < m.active_size; ++i) {
    const double a = m.alpha[ix(i)];
    if (a == 0.0) continue;
    const auto row = ctx.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.active_size; ++j) s += row[j] * m.alpha[ix(j)];
    quad += a * s;
    lin += a * linear_term(m.variant, ctx, i);
  }
  return m.variant == Variant::ocsvm ? 0.5 * quad : quad - lin;
}

void update_offset(SvmModel& m, const KernelContext& ctx) {
  const std::size_t n = m.active_size;
  double center = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = m.alpha[ix(i)];
    if (a > 0.0) center += a * (m.gradient[ix(i)] + 0.5 * linear_term(m.variant, ctx, i));
  }
  m.center_norm_sq = center;

  // OCSVM boundary value is (Ka)_i; SVDD uses the squared distance to the centre.
  auto boundary = [&](std::size_t i) {
    const double g = m.gradient[ix(i)];
    return m.variant == Variant::ocsvm ? g : center - 2.0 * g;
  };
  // (Ka)_i >= b at alpha = 0 for OCSVM; d_i^2 <= R^2 at alpha = 0 for SVDD.
  const bool zero_is_upper = m.variant == Variant::ocsvm;

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double at_zero_lo = std::numeric_limits<double>::infinity();
  double at_zero_hi = -std::numeric_limits<double>::infinity();
  double at_c_lo = std::numeric_limits<double>::infinity();
  double at_c_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = m.alpha[ix(i)];
    const double v = boundary(i);
    if (a > 0.0 && a < m.C) {
      free_sum += v;
      ++free_count;
    } else if (a == 0.0) {
      at_zero_lo = std::min(at_zero_lo, v);
      at_zero_hi = std::max(at_zero_hi, v);
    } else {
      at_c_lo = std::min(at_c_lo, v);
      at_c_hi = std::max(at_c_hi, v);
    }
  }

  double offset;
  if (free_count > 0) {
    offset = free_sum / static_cast<double>(free_count);
  } else {
    // Any value in the KKT interval is valid; take its midpoint.
    double lo = zero_is_upper ? at_c_hi : at_zero_hi;
    double hi = zero_is_upper ? at_zero_lo : at_c_lo;
    if (!std::isfinite(lo)) lo = hi;
    if (!std::isfinite(hi)) hi = lo;
    offset = 0.5 * (lo + hi);
  }
  if (m.variant == Variant::ocsvm) {
    m.bias = offset;
  } else {
    m.radius_sq = offset;
  }
}

void swap_positions(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t j) {
  if (i == j) return;
  ctx.swap(i, j);
  std::swap(m.alpha[ix(i)], m.alpha[ix(j)]);
  std::swap(m.gradient[ix(i)], m.gradient[ix(j)]);
}

}  // namespace losvm
