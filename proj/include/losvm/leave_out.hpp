#ifndef LOSVM_LEAVE_OUT_HPP
#define LOSVM_LEAVE_OUT_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "losvm/metrics.hpp"
#include "losvm/solver.hpp"

namespace losvm {

enum class ScoreMethod {
  initial_model,  // alpha_t = 0: the trained model is already optimal without x_t
  warm_retrain,   // support vector: retrained on the remaining points
};

std::string to_string(ScoreMethod m);

struct LeaveOutResult {
  double score = 0.0;
  ScoreMethod method = ScoreMethod::initial_model;
  std::uint64_t iterations = 0;
  /// Variant objective of the model used for scoring, over the remaining
  /// points. Only filled in when requested.
  double objective = 0.0;
};

/// Scores the point at position t against a model that excludes it.
/// Non-SVs are scored directly. SVs are swapped to the end of the active set,
/// their alpha is handed to a non-SV and the solver is warm-started; the
/// model and context ordering are restored before returning.
LeaveOutResult leave_out_evaluate(SvmModel& m, KernelContext& ctx, std::size_t t,
                                  const SolverOptions& opts = {}, bool with_objective = false);

inline double leave_out_score(SvmModel& m, KernelContext& ctx, std::size_t t, const SolverOptions& opts = {}) {
  return leave_out_evaluate(m, ctx, t, opts).score;
}

/// Restores sum(alpha) = 1 after the point at position t (>= active size) lost
/// its place: the full alpha_t goes to the lowest-position non-SV, or, when
/// every active point is an SV, is spread over SVs with headroom in order of
/// increasing alpha. The gradient is patched for every transfer.
void redistribute_alpha(SvmModel& m, KernelContext& ctx, std::size_t t);

/// Swaps position t to the last active slot, shrinks the active set by one and
/// redistributes its alpha. Returns the point's new position (the new active size).
/// The model is left unconverged when alpha had to move.
std::size_t detach_point(SvmModel& m, KernelContext& ctx, std::size_t t);

struct RemovedPoint {
  std::int64_t id = 0;
  double score = 0.0;
  std::size_t batch = 0;
};

struct BatchRecord {
  std::size_t batch = 0;
  std::vector<RemovedPoint> removed;
  std::size_t support_vectors = 0;
  std::uint64_t leave_out_iterations = 0;  // summed over the round's warm retrains
  std::uint64_t solver_iterations = 0;     // final pass after removal
  double wall_seconds = 0.0;
};

struct RemovalTrace {
  std::size_t total_removals = 0;  // R
  std::size_t batch_count = 0;     // b
  std::vector<BatchRecord> batches;
  std::uint64_t initial_iterations = 0;
  std::uint64_t final_scoring_iterations = 0;
  bool exhausted = false;  // the SV pool ran out before R points were removed
  std::vector<std::string> warnings;

  std::size_t removed_count() const;
  std::uint64_t total_iterations() const;
};

/// Per-point outcome in the original (construction) order of the context.
struct PointOutcome {
  std::int64_t id = 0;
  double score = 0.0;
  double initial_score = 0.0;  // diagnostic: slack score under the first model
  ScoreMethod method = ScoreMethod::initial_model;
  long removed_in_batch = -1;  // 1-based batch number, -1 for survivors
};

struct LosvmOptions {
  Variant variant = Variant::svdd;
  double C = 1.0;
  SolverOptions solver;
  std::size_t total_removals = 0;  // R
  std::size_t batches = 1;         // b
};

struct LosvmResult {
  std::vector<PointOutcome> points;
  RemovalTrace trace;
  ScoreReport report;
};

/// Repeated batchwise leave-out removal. `labels`, when given, is aligned with
/// the context's construction order and is copied into the report.
LosvmResult run_losvm(KernelContext& ctx, const LosvmOptions& options, const LabelVector* labels = nullptr);

/// Plain one-model scoring: every point gets its decision score under a
/// single model trained on all data.
std::vector<double> slack_scores(KernelContext& ctx, Variant variant, double C, const SolverOptions& opts = {});

}  // namespace losvm

#endif  // LOSVM_LEAVE_OUT_HPP
