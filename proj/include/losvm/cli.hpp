#ifndef LOSVM_CLI_HPP
#define LOSVM_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "losvm/dataset.hpp"
#include "losvm/leave_out.hpp"
#include "losvm/metrics.hpp"
#include "losvm/solver.hpp"

namespace losvm {

/// Invalid or conflicting run configuration (exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GammaHeuristic { scott, sklearn, silverman };
enum class Baseline { none, knn, slack };

std::string to_string(GammaHeuristic h);
std::string to_string(Baseline b);

struct RunConfig {
  std::filesystem::path input;
  std::optional<std::string> label_column;
  Variant variant = Variant::svdd;
  std::optional<double> nu;
  std::optional<double> C;
  std::optional<double> gamma;  // explicit value overrides the heuristic
  GammaHeuristic heuristic = GammaHeuristic::silverman;
  double gamma_factor = 0.0;  // gamma = 10^f * heuristic
  std::size_t R = 0;
  std::size_t b = 1;
  double eps = 1e-4;
  std::uint64_t seed = 1;
  std::filesystem::path output = "scores.csv";
  std::optional<std::filesystem::path> trace_output;
  Baseline baseline = Baseline::none;
  std::size_t knn_k = 1;
  std::size_t threads = 1;
  bool deduplicate = true;
  bool record_timing = false;
  std::size_t cache_mb = 256;
};

/// Throws ConfigError for conflicts; returns warnings for odd but legal values.
std::vector<std::string> validate(const RunConfig& cfg);

/// Loaded, standardized data plus the hyperparameters derived from it.
struct PreparedRun {
  DataMatrix data;
  double C = 1.0;
  double variance = 1.0;
  double gamma_heuristic = 1.0;
  double gamma = 1.0;
};

PreparedRun prepare(const RunConfig& cfg);
PreparedRun prepare(const RunConfig& cfg, const DataMatrix& standardized);

struct ScoreRun {
  PreparedRun prepared;
  ScoreReport report;
  std::optional<LosvmResult> losvm;  // absent for baselines
  std::vector<double> scores;        // aligned with prepared.data rows
};

/// Scores a prepared dataset without touching the filesystem.
ScoreRun score_prepared(const RunConfig& cfg, PreparedRun prepared);

/// Serialized outputs; both embed the resolved configuration on their first line / key.
std::string format_scores_csv(const RunConfig& cfg, const ScoreRun& run);
std::string format_trace_json(const RunConfig& cfg, const ScoreRun& run);

/// Runs the configured pipeline, writes the scores CSV and trace JSON and
/// prints metrics (when labels exist) to `log`.
ScoreRun cmd_score(const RunConfig& cfg, std::ostream& log);

struct SweepRow {
  double f = 0.0;
  double gamma = 0.0;
  double avep = 0.0;
  double adj_avep = 0.0;
  double auroc = 0.0;
};

std::vector<double> default_gamma_factors();

/// One row per gamma factor; requires labeled data. Writes cfg.output as CSV.
std::vector<SweepRow> cmd_sweep_gamma(const RunConfig& cfg, const std::vector<double>& f_values, std::ostream& log);
std::string format_sweep_csv(const RunConfig& cfg, const std::vector<SweepRow>& rows);

DataMatrix cmd_synth(std::size_t n_cluster, std::size_t n_noise, std::uint64_t seed,
                     const std::filesystem::path& path);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace losvm

#endif  // LOSVM_CLI_HPP
