#include "losvm/leave_out.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace losvm {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

/// Puts model and context back the way they were when constructed.
class LeaveOutRestore {
 public:
  LeaveOutRestore(SvmModel& m, KernelContext& ctx, std::size_t t, std::size_t last)
      : m_(m), ctx_(ctx), t_(t), last_(last), alpha_(m.alpha), gradient_(m.gradient),
        bias_(m.bias), radius_sq_(m.radius_sq), center_(m.center_norm_sq), active_(m.active_size) {}

  ~LeaveOutRestore() {
    ctx_.set_active_size(active_);
    ctx_.swap(t_, last_);
    m_.active_size = active_;
    m_.alpha = std::move(alpha_);
    m_.gradient = std::move(gradient_);
    m_.bias = bias_;
    m_.radius_sq = radius_sq_;
    m_.center_norm_sq = center_;
    m_.converged = true;
  }

  LeaveOutRestore(const LeaveOutRestore&) = delete;
  LeaveOutRestore& operator=(const LeaveOutRestore&) = delete;

 private:
  SvmModel& m_;
  KernelContext& ctx_;
  std::size_t t_;
  std::size_t last_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd gradient_;
  double bias_;
  double radius_sq_;
  double center_;
  std::size_t active_;
};

struct Candidate {
  double score;
  std::int64_t id;
  std::size_t original;
};

// Orders by "more outlying first": higher score, then lower id.
bool more_outlying(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(ScoreMethod m) {
  return m == ScoreMethod::initial_model ? "initial_model" : "warm_retrain";
}

std::size_t RemovalTrace::removed_count() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.removed.size();
  return n;
}

std::uint64_t RemovalTrace::total_iterations() const {
  std::uint64_t n = initial_iterations + final_scoring_iterations;
  for (const auto& b : batches) n += b.leave_out_iterations + b.solver_iterations;
  return n;
}

void redistribute_alpha(SvmModel& m, KernelContext& ctx, std::size_t t) {
  if (t < m.active_size) throw std::logic_error("redistribute_alpha: point must lie outside the active set");
  const double at = m.alpha[ix(t)];
  if (at == 0.0) return;

  for (std::size_t j = 0; j < m.active_size; ++j) {
    if (m.alpha[ix(j)] != 0.0) continue;
    // A non-SV can absorb any alpha_t <= C in a single pair update.
    m.alpha[ix(t)] = 0.0;
    m.alpha[ix(j)] = at;
    update_gradient(m, ctx, j, t, 0.0, at, at, 0.0);
    m.converged = false;
    return;
  }

  std::vector<std::size_t> open;
  double headroom = 0.0;
  for (std::size_t j = 0; j < m.active_size; ++j) {
    if (m.alpha[ix(j)] < m.C) {
      open.push_back(j);
      headroom += m.C - m.alpha[ix(j)];
    }
  }
  if (headroom < at * (1.0 - 1e-12)) {
    throw std::invalid_argument("redistribute_alpha: remaining points cannot absorb alpha (C * N < 1)");
  }
  std::stable_sort(open.begin(), open.end(),
                   [&](std::size_t a, std::size_t b) { return m.alpha[ix(a)] < m.alpha[ix(b)]; });

  m.alpha[ix(t)] = 0.0;
  update_gradient(m, ctx, t, t, at, 0.0, 0.0, 0.0);
  double remaining = at;
  for (std::size_t idx = 0; idx < open.size() && remaining > 0.0; ++idx) {
    const std::size_t j = open[idx];
    const double old = m.alpha[ix(j)];
    const double give = std::min(m.C - old, remaining);
    const double updated = give == m.C - old ? m.C : old + give;
    m.alpha[ix(j)] = updated;
    update_gradient(m, ctx, j, j, old, updated, 0.0, 0.0);
    remaining -= give;
  }
  m.converged = false;
}

std::size_t detach_point(SvmModel& m, KernelContext& ctx, std::size_t t) {
  if (t >= m.active_size) throw std::out_of_range("detach_point: position outside the active set");
  const std::size_t last = m.active_size - 1;
  swap_positions(m, ctx, t, last);
  m.active_size = last;
  ctx.set_active_size(last);
  if (m.alpha[ix(last)] > 0.0) {
    redistribute_alpha(m, ctx, last);
  } else if (m.converged) {
    update_offset(m, ctx);
  }
  return last;
}

LeaveOutResult leave_out_evaluate(SvmModel& m, KernelContext& ctx, std::size_t t, const SolverOptions& opts,
                                  bool with_objective) {
  if (t >= m.active_size) throw std::out_of_range("leave_out_score: position outside the active set");
  if (!m.converged) throw std::logic_error("leave_out_score requires a converged model");

  LeaveOutResult result;
  if (m.alpha[ix(t)] == 0.0) {
    result.score = decision_score(m, ctx, ctx.point(t));
    result.method = ScoreMethod::initial_model;
    if (with_objective) result.objective = dual_objective(m, ctx);
    return result;
  }
  if (m.active_size < 2) throw std::invalid_argument("leave_out_score: cannot leave out the only point");

  const std::size_t last = m.active_size - 1;
  LeaveOutRestore restore(m, ctx, t, last);
  detach_point(m, ctx, t);
  const SolveStats stats = optimize(m, ctx, opts);
  result.score = decision_score(m, ctx, ctx.point(last));
  result.method = ScoreMethod::warm_retrain;
  result.iterations = stats.iterations;
  if (with_objective) result.objective = dual_objective(m, ctx);
  return result;
}

LosvmResult run_losvm(KernelContext& ctx, const LosvmOptions& options, const LabelVector* labels) {
  const std::size_t n = ctx.size();
  const std::size_t R = options.total_removals;
  const std::size_t b = options.batches;
  if (b < 1) throw std::invalid_argument("batch count b must be at least 1");
  if (R >= n) throw std::invalid_argument("R must be smaller than the number of points");
  if (n - R < 2) throw std::invalid_argument("at least two points must survive removal");
  if (R > 0 && R % b != 0) throw std::invalid_argument("b must divide R");
  if (labels && static_cast<std::size_t>(labels->size()) != n) throw std::invalid_argument("labels/points size mismatch");

  ctx.set_active_size(n);
  LosvmResult result;
  RemovalTrace& trace = result.trace;
  trace.total_removals = R;
  trace.batch_count = R > 0 ? b : 0;

  SolveStats init_stats;
  SvmModel m = train(ctx, options.variant, options.C, options.solver, &init_stats);
  trace.initial_iterations = init_stats.iterations;

  std::vector<PointOutcome>& out = result.points;
  out.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    auto& o = out[ctx.original_at(p)];
    o.id = ctx.id_at(p);
    o.initial_score = decision_score(m, ctx, ctx.point(p));
  }

  const std::size_t per_batch = R > 0 ? R / b : 0;
  for (std::size_t batch = 1; R > 0 && batch <= b; ++batch) {
    const auto start = std::chrono::steady_clock::now();
    BatchRecord rec;
    rec.batch = batch;

    // Heap keeps the per_batch most outlying SVs; top() is the least outlying kept.
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(&more_outlying)> heap(&more_outlying);
    const auto svs = m.sv_indices();
    rec.support_vectors = svs.size();
    for (const std::size_t p : svs) {
      const LeaveOutResult r = leave_out_evaluate(m, ctx, p, options.solver);
      rec.leave_out_iterations += r.iterations;
      const Candidate c{r.score, ctx.id_at(p), ctx.original_at(p)};
      if (heap.size() < per_batch) {
        heap.push(c);
      } else if (more_outlying(c, heap.top())) {
        heap.pop();
        heap.push(c);
      }
    }
    if (svs.size() < per_batch) {
      trace.exhausted = true;
      trace.warnings.push_back("batch " + std::to_string(batch) + ": only " + std::to_string(svs.size()) +
                               " support vectors for " + std::to_string(per_batch) +
                               " removals; stopping early");
    }

    std::vector<Candidate> chosen;
    while (!heap.empty()) {
      chosen.push_back(heap.top());
      heap.pop();
    }
    std::reverse(chosen.begin(), chosen.end());
    for (const auto& c : chosen) {
      detach_point(m, ctx, ctx.position_of_original(c.original));
      auto& o = out[c.original];
      o.score = c.score;
      o.method = ScoreMethod::warm_retrain;
      o.removed_in_batch = static_cast<long>(batch);
      rec.removed.push_back({c.id, c.score, batch});
    }
    rec.solver_iterations = optimize(m, ctx, options.solver).iterations;
    rec.wall_seconds = seconds_since(start);
    trace.batches.push_back(std::move(rec));
    if (trace.exhausted) break;
  }

  for (std::size_t p = 0; p < m.active_size; ++p) {
    const LeaveOutResult r = leave_out_evaluate(m, ctx, p, options.solver);
    trace.final_scoring_iterations += r.iterations;
    auto& o = out[ctx.original_at(p)];
    o.score = r.score;
    o.method = r.method;
  }

  IdVector ids(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = out[i].id;
    scores[i] = out[i].score;
  }
  result.report = make_score_report(ids, scores, labels);
  return result;
}

std::vector<double> slack_scores(KernelContext& ctx, Variant variant, double C, const SolverOptions& opts) {
  ctx.set_active_size(ctx.size());
  const SvmModel m = train(ctx, variant, C, opts);
  std::vector<double> scores(ctx.size());
  for (std::size_t p = 0; p < ctx.size(); ++p) scores[ctx.original_at(p)] = decision_score(m, ctx, ctx.point(p));
  return scores;
}

}  // namespace losvm
