#ifndef LOSVM_SOLVER_HPP
#define LOSVM_SOLVER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "losvm/kernel.hpp"

namespace losvm {

enum class Variant { ocsvm, svdd };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Thrown when the pair-update budget runs out; carries the last KKT gap.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(double gap, std::uint64_t iterations);
  double gap() const noexcept { return gap_; }
  std::uint64_t iterations() const noexcept { return iterations_; }

 private:
  double gap_;
  std::uint64_t iterations_;
};

struct SolverOptions {
  double eps = 1e-4;
  std::uint64_t max_iter = 10'000'000;
  double tau = 1e-12;
};

/// Dual state shared by OCSVM and SVDD.
///
/// Both variants minimise 1/2 a'Qa - 1/2 p'a over {0 <= a_i <= C, sum a = 1}
/// with Q = K and p = 0 (OCSVM) or p = diag(K) (SVDD). The 1/2 scaling leaves
/// the argmin unchanged and makes the gradient G = Qa - p/2 follow the
/// classic pairwise update G_j += K_ij da_i + K_kj da_k.
///
/// Positions refer to the KernelContext ordering; alpha and G are swapped in
/// lockstep with it. Entries at positions >= active_size are not maintained.
struct SvmModel {
  Variant variant = Variant::svdd;
  Eigen::VectorXd alpha;
  Eigen::VectorXd gradient;
  double C = 1.0;
  double bias = 0.0;       // OCSVM offset b
  double radius_sq = 0.0;  // SVDD R^2
  double center_norm_sq = 0.0;  // a'Ka, the squared norm of the SVDD centre
  std::size_t active_size = 0;
  bool converged = false;

  std::vector<std::size_t> sv_indices() const;
  double alpha_sum() const { return alpha.head(static_cast<Eigen::Index>(active_size)).sum(); }
};

struct SolveStats {
  std::uint64_t iterations = 0;
  double gap = 0.0;
};

/// Linear term of the variant's dual at position i.
double linear_term(Variant v, const KernelContext& ctx, std::size_t i);

/// Cold start: uniform alpha over the active set, then optimise.
SvmModel train(KernelContext& ctx, Variant variant, double C, const SolverOptions& opts = {},
               SolveStats* stats = nullptr);

/// Runs most-violating-pair SMO from the current (feasible) state, then
/// refreshes bias / radius. Throws ConvergenceError after opts.max_iter updates.
SolveStats optimize(SvmModel& m, KernelContext& ctx, const SolverOptions& opts = {});

/// max_{a_i > 0} G_i - min_{a_i < C} G_i over the active set (0 if either set is empty).
double kkt_gap(const SvmModel& m);

/// Most violating pair (i, k), or nullopt when the gap is at most eps.
/// Ties resolve to the lowest position.
std::optional<std::pair<std::size_t, std::size_t>> select_violating_pair(const SvmModel& m, double eps);

/// Moves the optimal clipped amount of mass from alpha_i to alpha_k.
/// Returns false when the step was clipped to zero.
bool smo_step(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t k, double tau = 1e-12);

/// G_j += K_ij (new_i - old_i) + K_kj (new_k - old_k) for every active j.
void update_gradient(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t k, double old_i,
                     double new_i, double old_k, double new_k);

/// From-scratch gradient Qa - p/2 over the active set.
Eigen::VectorXd full_gradient(const SvmModel& m, KernelContext& ctx);

/// Variant objective: 1/2 a'Ka for OCSVM, a'Ka - diag(K)'a for SVDD.
double dual_objective(const SvmModel& m, KernelContext& ctx);

/// Recomputes bias (OCSVM) or radius (SVDD) from the current gradient,
/// averaging over free support vectors.
void update_offset(SvmModel& m, const KernelContext& ctx);

/// Exchanges positions i and j in the context and in alpha / G.
void swap_positions(SvmModel& m, KernelContext& ctx, std::size_t i, std::size_t j);

/// Outlier score, positive outside the boundary.
/// OCSVM: b - sum a_i K(x_i, x). SVDD: ||phi(x) - a||^2 - R^2.
template <typename Derived>
double decision_score(const SvmModel& m, const KernelContext& ctx, const Eigen::MatrixBase<Derived>& x) {
  if (!m.converged) throw std::logic_error("decision_score requires a converged model");
  const Kernel& kernel = ctx.kernel();
  double weighted = 0.0;
  for (std::size_t i = 0; i < m.active_size; ++i) {
    const double a = m.alpha[static_cast<Eigen::Index>(i)];
    if (a > 0.0) weighted += a * kernel(ctx.point(i), x);
  }
  if (m.variant == Variant::ocsvm) return m.bias - weighted;
  return kernel(x, x) - 2.0 * weighted + m.center_norm_sq - m.radius_sq;
}

}  // namespace losvm

#endif  // LOSVM_SOLVER_HPP
