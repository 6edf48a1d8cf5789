#ifndef LOSVM_METRICS_HPP
#define LOSVM_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "losvm/dataset.hpp"

namespace losvm {

struct ScoreEntry {
  std::int64_t id = 0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
  std::optional<bool> outlier;
};

struct RankingMetrics {
  double avep = 0.0;
  double adj_avep = 0.0;
  double auroc = 0.0;
};

/// Points sorted by descending score, ties broken by lower id.
struct ScoreReport {
  std::vector<ScoreEntry> entries;
  std::optional<RankingMetrics> metrics;
  std::size_t outlier_count = 0;
  std::size_t total = 0;
};

/// Builds a ranked report; when `labels` is given (aligned with `ids`) the
/// metrics are filled in as well, provided both classes occur.
ScoreReport make_score_report(std::span<const std::int64_t> ids, std::span<const double> scores,
                              const LabelVector* labels = nullptr);

/// Mean of precision@rank(o) over all labeled outliers, using the report ranks.
double average_precision(const ScoreReport& ranking);

double adjusted_average_precision(double avep, std::size_t outliers, std::size_t n);

/// P(score(o) > score(i)) over outlier/inlier pairs, ties counted as 1/2.
double auroc(std::span<const double> scores, const LabelVector& labels);

/// Distance to the k-th nearest other point.
std::vector<double> knn_scores(const PointMatrix& points, std::size_t k = 1, std::size_t threads = 1);

ScoreReport knn_baseline(const DataMatrix& m, std::size_t k = 1, std::size_t threads = 1);

}  // namespace losvm

#endif  // LOSVM_METRICS_HPP
