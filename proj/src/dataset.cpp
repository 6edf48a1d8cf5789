#include "losvm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "losvm/random.hpp"

namespace losvm {

namespace {

std::string location_message(const std::string& what, std::size_t line, std::size_t column) {
  std::string msg = what;
  if (line > 0) {
    msg += " (line " + std::to_string(line);
    if (column > 0) msg += ", column " + std::to_string(column);
    msg += ")";
  }
  return msg;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "?" || iequals(cell, "na") || iequals(cell, "nan");
}

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<bool> parse_label(std::string_view cell) {
  if (iequals(cell, "yes")) return true;
  if (iequals(cell, "no")) return false;
  if (const auto v = parse_number(cell)) {
    if (*v == 1.0) return true;
    if (*v == 0.0) return false;
  }
  return std::nullopt;
}

bool row_is_numeric(const std::vector<std::string_view>& fields) {
  return std::all_of(fields.begin(), fields.end(),
                     [](std::string_view c) { return is_missing(c) || parse_number(c).has_value(); });
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

DataError::DataError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(location_message(what, line, column)), line_(line), column_(column) {}

Eigen::Index DataMatrix::outlier_count() const {
  return labels ? labels->count() : 0;
}

DataMatrix parse_csv(const std::string& text, const CsvOptions& options, const std::string& source) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  {
    std::string_view rest(text);
    std::size_t line_no = 0;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      ++line_no;
      if (!trim(line).empty()) lines.emplace_back(line_no, line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw DataError("empty dataset: " + source);

  auto first = split_fields(lines.front().second);
  const bool has_header = options.label_column.has_value() || !row_is_numeric(first);
  const std::size_t ncols = first.size();

  std::vector<std::string> names;
  std::optional<std::size_t> label_col;
  if (has_header) {
    for (auto f : first) names.emplace_back(f);
    if (options.label_column) {
      const auto it = std::find(names.begin(), names.end(), *options.label_column);
      if (it == names.end()) {
        throw DataError("label column '" + *options.label_column + "' not found in header of " + source,
                        lines.front().first);
      }
      label_col = static_cast<std::size_t>(it - names.begin());
    }
  } else {
    for (std::size_t c = 0; c < ncols; ++c) names.push_back("x" + std::to_string(c));
  }

  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < ncols; ++c)
    if (!label_col || c != *label_col) feature_names.push_back(names[c]);
  const std::size_t dims = feature_names.size();
  if (dims == 0) throw DataError("no feature columns in " + source);

  std::vector<double> values;
  std::vector<bool> flags;
  IdVector ids;
  std::size_t dropped = 0;
  std::int64_t data_row = 0;
  for (std::size_t li = has_header ? 1 : 0; li < lines.size(); ++li, ++data_row) {
    const auto [line_no, line] = lines[li];
    const auto fields = split_fields(line);
    if (fields.size() != ncols) {
      throw DataError("expected " + std::to_string(ncols) + " fields, found " +
                          std::to_string(fields.size()) + " in " + source,
                      line_no);
    }
    bool missing = false;
    std::vector<double> row;
    row.reserve(dims);
    bool flag = false;
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto cell = fields[c];
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      if (label_col && c == *label_col) {
        const auto lab = parse_label(cell);
        if (!lab) throw DataError("invalid label '" + std::string(cell) + "' in " + source, line_no, c + 1);
        flag = *lab;
        continue;
      }
      const auto v = parse_number(cell);
      if (!v) throw DataError("cannot parse '" + std::string(cell) + "' as a number in " + source, line_no, c + 1);
      row.push_back(*v);
    }
    if (missing) {
      ++dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    flags.push_back(flag);
    ids.push_back(data_row);
  }
  if (ids.empty()) throw DataError("empty dataset after dropping rows with missing values: " + source);

  DataMatrix m;
  m.points = Eigen::Map<const PointMatrix>(values.data(), static_cast<Eigen::Index>(ids.size()),
                                           static_cast<Eigen::Index>(dims));
  if (label_col) {
    m.labels = LabelVector(static_cast<Eigen::Index>(flags.size()));
    for (std::size_t i = 0; i < flags.size(); ++i) (*m.labels)(static_cast<Eigen::Index>(i)) = flags[i];
  }
  m.ids = std::move(ids);
  m.feature_names = std::move(feature_names);
  m.dropped_missing = dropped;
  return options.deduplicate ? deduplicate(m) : m;
}

DataMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), options, path.string());
}

std::string format_csv(const DataMatrix& m) {
  std::string out;
  for (Eigen::Index c = 0; c < m.dims(); ++c) {
    if (c > 0) out += ',';
    out += c < static_cast<Eigen::Index>(m.feature_names.size()) ? m.feature_names[c]
                                                                 : "x" + std::to_string(c);
  }
  if (m.labels) out += ",outlier";
  out += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.dims(); ++c) {
      if (c > 0) out += ',';
      append_number(out, m.points(r, c));
    }
    if (m.labels) out += (*m.labels)(r) ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

void write_csv(const DataMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_csv(m);
}

DataMatrix deduplicate(const DataMatrix& m) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < m.dims(); ++c) {
      if (m.points(a, c) < m.points(b, c)) return true;
      if (m.points(b, c) < m.points(a, c)) return false;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return row_less(a, b); });
  std::vector<bool> keep(static_cast<std::size_t>(n), true);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!row_less(order[i - 1], order[i])) keep[static_cast<std::size_t>(order[i])] = false;
  }

  std::vector<Eigen::Index> kept;
  for (Eigen::Index r = 0; r < n; ++r)
    if (keep[static_cast<std::size_t>(r)]) kept.push_back(r);
  if (static_cast<Eigen::Index>(kept.size()) == n) return m;

  DataMatrix out;
  out.points = m.points(kept, Eigen::all);
  if (m.labels) out.labels = (*m.labels)(kept);
  for (auto r : kept) out.ids.push_back(m.ids[static_cast<std::size_t>(r)]);
  out.feature_names = m.feature_names;
  out.dropped_missing = m.dropped_missing;
  out.dropped_duplicates = m.dropped_duplicates + static_cast<std::size_t>(n) - kept.size();
  return out;
}

DataMatrix standardize(const DataMatrix& m) {
  if (m.rows() < 2) throw std::invalid_argument("standardize requires at least 2 rows");
  DataMatrix out = m;
  const double n = static_cast<double>(m.rows());
  for (Eigen::Index c = 0; c < m.dims(); ++c) {
    auto col = out.points.col(c);
    if (col.maxCoeff() == col.minCoeff()) {
      col.setZero();
      continue;
    }
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    col /= sd;
  }
  return out;
}

double total_variance(const DataMatrix& m) {
  if (m.rows() < 2) throw std::invalid_argument("total_variance requires at least 2 rows");
  const double n = static_cast<double>(m.rows());
  const Eigen::RowVectorXd mean = m.points.colwise().sum() / n;
  const Eigen::RowVectorXd var = (m.points.rowwise() - mean).colwise().squaredNorm() / n;
  return var.mean();
}

DataMatrix synth_dirty(std::size_t n_cluster, std::size_t n_noise, std::uint64_t seed) {
  if (n_cluster < 2) throw std::invalid_argument("synth_dirty requires n_cluster >= 2");
  SplitMix64 rng(seed);
  const std::size_t n = n_cluster + n_noise;
  DataMatrix m;
  m.points.resize(static_cast<Eigen::Index>(n), 2);
  m.labels = LabelVector::Constant(static_cast<Eigen::Index>(n), false);

  struct Blob {
    double cx, cy, sd;
  };
  constexpr Blob blobs[2] = {{-2.0, -1.0, 0.8}, {2.5, 2.0, 0.5}};
  const std::size_t first = n_cluster / 2;
  for (std::size_t i = 0; i < n_cluster; ++i) {
    const Blob& b = blobs[i < first ? 0 : 1];
    const auto r = static_cast<Eigen::Index>(i);
    m.points(r, 0) = b.cx + b.sd * rng.normal();
    m.points(r, 1) = b.cy + b.sd * rng.normal();
  }

  const auto nc = static_cast<Eigen::Index>(n_cluster);
  const Eigen::RowVector2d lo = m.points.topRows(nc).colwise().minCoeff().array() - 1.0;
  const Eigen::RowVector2d hi = m.points.topRows(nc).colwise().maxCoeff().array() + 1.0;
  for (std::size_t i = n_cluster; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m.points(r, 0) = lo(0) + (hi(0) - lo(0)) * rng.uniform();
    m.points(r, 1) = lo(1) + (hi(1) - lo(1)) * rng.uniform();
    (*m.labels)(r) = true;
  }
  m.ids.resize(n);
  std::iota(m.ids.begin(), m.ids.end(), 0);
  m.feature_names = {"x0", "x1"};
  return m;
}

}  // namespace losvm
