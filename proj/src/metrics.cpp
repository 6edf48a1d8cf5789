#include "losvm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace losvm {

ScoreReport make_score_report(std::span<const std::int64_t> ids, std::span<const double> scores,
                              const LabelVector* labels) {
  if (ids.size() != scores.size()) throw std::invalid_argument("ids and scores differ in length");
  if (labels && static_cast<std::size_t>(labels->size()) != ids.size()) {
    throw std::invalid_argument("labels and scores differ in length");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });

  ScoreReport report;
  report.total = ids.size();
  report.entries.reserve(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    ScoreEntry e{ids[i], scores[i], r + 1, std::nullopt};
    if (labels) {
      e.outlier = (*labels)(static_cast<Eigen::Index>(i));
      if (*e.outlier) ++report.outlier_count;
    }
    report.entries.push_back(e);
  }
  if (labels && report.outlier_count > 0 && report.outlier_count < report.total) {
    RankingMetrics m;
    m.avep = average_precision(report);
    m.adj_avep = adjusted_average_precision(m.avep, report.outlier_count, report.total);
    m.auroc = auroc(scores, *labels);
    report.metrics = m;
  }
  return report;
}

double average_precision(const ScoreReport& ranking) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (const auto& e : ranking.entries) {
    if (!e.outlier) throw std::invalid_argument("average_precision requires labels");
    if (*e.outlier) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(e.rank);
    }
  }
  if (hits == 0) throw std::invalid_argument("average_precision requires at least one labeled outlier");
  return sum / static_cast<double>(hits);
}

double adjusted_average_precision(double avep, std::size_t outliers, std::size_t n) {
  if (n == 0 || outliers >= n) throw std::invalid_argument("adjusted average precision needs 0 <= |O| < N");
  const double expected = static_cast<double>(outliers) / static_cast<double>(n);
  return (avep - expected) / (1.0 - expected);
}

double auroc(std::span<const double> scores, const LabelVector& labels) {
  if (static_cast<std::size_t>(labels.size()) != scores.size()) {
    throw std::invalid_argument("labels and scores differ in length");
  }
  const auto pos = static_cast<std::size_t>(labels.count());
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auroc requires both outliers and inliers");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending order; each outlier beats all inliers below
  // its group and half of the inliers inside it.
  double wins = 0.0;
  std::size_t inliers_below = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    std::size_t group_pos = 0;
    std::size_t group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[g]]) {
      if (labels(static_cast<Eigen::Index>(order[end]))) {
        ++group_pos;
      } else {
        ++group_neg;
      }
      ++end;
    }
    wins += static_cast<double>(group_pos) *
            (static_cast<double>(inliers_below) + 0.5 * static_cast<double>(group_neg));
    inliers_below += group_neg;
    g = end;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<double> knn_scores(const PointMatrix& points, std::size_t k, std::size_t threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1 || n <= k) throw std::invalid_argument("knn requires 1 <= k < N");
  std::vector<double> out(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> dist(n - 1);
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t w = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        dist[w++] = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
      }
      std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
      out[i] = dist[k - 1];
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, n);
  if (threads == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t begin = 0; begin < n; begin += chunk) pool.emplace_back(work, begin, std::min(n, begin + chunk));
  pool.clear();
  return out;
}

ScoreReport knn_baseline(const DataMatrix& m, std::size_t k, std::size_t threads) {
  const auto scores = knn_scores(m.points, k, threads);
  return make_score_report(m.ids, scores, m.labels ? &*m.labels : nullptr);
}

}  // namespace losvm
