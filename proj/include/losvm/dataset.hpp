#ifndef LOSVM_DATASET_HPP
#define LOSVM_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace losvm {

/// Row-major storage keeps each observation contiguous for kernel evaluation.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelVector = Eigen::Array<bool, Eigen::Dynamic, 1>;
using IdVector = std::vector<std::int64_t>;

/// Raised for malformed input files. Carries the 1-based line and column when known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Numeric observations with optional ground-truth outlier flags.
///
/// `ids` are the 0-based data-row numbers of the source file (header excluded)
/// and stay attached to their observation through every later reordering.
struct DataMatrix {
  PointMatrix points;
  std::optional<LabelVector> labels;
  IdVector ids;
  std::vector<std::string> feature_names;
  std::size_t dropped_missing = 0;
  std::size_t dropped_duplicates = 0;

  Eigen::Index rows() const { return points.rows(); }
  Eigen::Index dims() const { return points.cols(); }
  bool labeled() const { return labels.has_value(); }
  Eigen::Index outlier_count() const;
};

struct CsvOptions {
  std::optional<std::string> label_column;
  bool deduplicate = true;
};

/// Parses a comma-separated file. A header row is present iff the first row
/// does not parse as numbers (or a label column is requested by name).
/// Rows with missing cells (empty, "?", "NA", "NaN") are dropped and counted.
DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Same as load_csv but reads from an in-memory string; `source` names it in errors.
DataMatrix parse_csv(const std::string& text, const CsvOptions& options = {},
                     const std::string& source = "<string>");

/// Writes points (and labels as a trailing "outlier" 0/1 column) with
/// round-trip exact number formatting.
void write_csv(const DataMatrix& m, const std::filesystem::path& path);
std::string format_csv(const DataMatrix& m);

/// Per-column z-scoring with population variance; constant columns become 0.
DataMatrix standardize(const DataMatrix& m);

/// Mean of the per-column population variances.
double total_variance(const DataMatrix& m);

/// Exact-match duplicate removal keeping the first occurrence.
DataMatrix deduplicate(const DataMatrix& m);

/// Two isotropic 2-d Gaussian clusters plus uniform noise labeled as outliers.
DataMatrix synth_dirty(std::size_t n_cluster, std::size_t n_noise, std::uint64_t seed);

}  // namespace losvm

#endif  // LOSVM_DATASET_HPP
