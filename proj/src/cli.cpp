#include "losvm/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"

namespace losvm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path trace_path(const RunConfig& cfg) {
  if (cfg.trace_output) return *cfg.trace_output;
  auto p = cfg.output;
  p += ".trace.json";
  return p;
}

double heuristic_gamma(GammaHeuristic h, std::size_t n, std::size_t d, double var) {
  switch (h) {
    case GammaHeuristic::scott:
      return gamma_scott(n, d, var);
    case GammaHeuristic::sklearn:
      return gamma_sklearn(d, var);
    case GammaHeuristic::silverman:
      return gamma_silverman(n, d, var);
  }
  throw std::logic_error("unknown heuristic");
}

ordered_json config_json(const RunConfig& cfg, const PreparedRun* prepared) {
  ordered_json j;
  j["input"] = cfg.input.string();
  j["label_column"] = cfg.label_column ? ordered_json(*cfg.label_column) : ordered_json(nullptr);
  j["variant"] = to_string(cfg.variant);
  j["nu"] = cfg.nu ? ordered_json(*cfg.nu) : ordered_json(nullptr);
  j["C_option"] = cfg.C ? ordered_json(*cfg.C) : ordered_json(nullptr);
  j["gamma_source"] = cfg.gamma ? "explicit" : to_string(cfg.heuristic);
  j["gamma_factor"] = cfg.gamma_factor;
  j["R"] = cfg.R;
  j["b"] = cfg.b;
  j["eps"] = cfg.eps;
  j["seed"] = cfg.seed;
  j["baseline"] = to_string(cfg.baseline);
  j["knn_k"] = cfg.knn_k;
  j["deduplicate"] = cfg.deduplicate;
  j["cache_mb"] = cfg.cache_mb;
  if (prepared) {
    j["n"] = prepared->data.rows();
    j["d"] = prepared->data.dims();
    j["dropped_missing"] = prepared->data.dropped_missing;
    j["dropped_duplicates"] = prepared->data.dropped_duplicates;
    j["variance"] = prepared->variance;
    j["C"] = prepared->C;
    j["gamma_heuristic_value"] = prepared->gamma_heuristic;
    j["gamma"] = prepared->gamma;
  }
  return j;
}

std::string method_tag(const RunConfig& cfg, const ScoreRun& run, std::size_t row) {
  if (run.losvm) return to_string(run.losvm->points[row].method);
  return cfg.baseline == Baseline::knn ? "knn" : "slack";
}

void print_metrics(std::ostream& log, const ScoreReport& report) {
  if (!report.metrics) return;
  const auto& m = *report.metrics;
  log << "N=" << report.total << " outliers=" << report.outlier_count << " AveP=" << fmt(m.avep)
      << " AdjAveP=" << fmt(m.adj_avep) << " AUROC=" << fmt(m.auroc) << '\n';
}

}  // namespace

std::string to_string(GammaHeuristic h) {
  switch (h) {
    case GammaHeuristic::scott:
      return "scott";
    case GammaHeuristic::sklearn:
      return "sklearn";
    case GammaHeuristic::silverman:
      return "silverman";
  }
  return "?";
}

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::none:
      return "none";
    case Baseline::knn:
      return "knn";
    case Baseline::slack:
      return "slack";
  }
  return "?";
}

std::vector<std::string> validate(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  if (cfg.nu && cfg.C) throw ConfigError("--nu and --C are mutually exclusive");
  if (cfg.nu && !(*cfg.nu > 0.0 && *cfg.nu <= 1.0)) throw ConfigError("--nu must lie in (0, 1]");
  if (cfg.C && !(*cfg.C > 0.0)) throw ConfigError("--C must be positive");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) throw ConfigError("--gamma must be positive");
  if (!(cfg.eps > 0.0)) throw ConfigError("--eps must be positive");
  if (cfg.b < 1) throw ConfigError("--b must be at least 1");
  if (cfg.R > 0 && cfg.R % cfg.b != 0) throw ConfigError("--b must divide --R");
  if (cfg.knn_k < 1) throw ConfigError("--knn-k must be at least 1");
  if (!std::isfinite(cfg.gamma_factor)) throw ConfigError("--gamma-factor must be finite");
  const double quarters = cfg.gamma_factor * 4.0;
  if (cfg.gamma_factor < -1.0 || cfg.gamma_factor > 1.0 || quarters != std::round(quarters)) {
    warnings.push_back("gamma factor " + fmt(cfg.gamma_factor) +
                       " is outside the usual grid -1, -0.75, ..., 1");
  }
  return warnings;
}

PreparedRun prepare(const RunConfig& cfg) {
  CsvOptions csv;
  csv.label_column = cfg.label_column;
  csv.deduplicate = cfg.deduplicate;
  const DataMatrix raw = load_csv(cfg.input, csv);
  return prepare(cfg, standardize(raw));
}

PreparedRun prepare(const RunConfig& cfg, const DataMatrix& standardized) {
  PreparedRun p;
  p.data = standardized;
  const auto n = static_cast<std::size_t>(p.data.rows());
  const auto d = static_cast<std::size_t>(p.data.dims());
  p.variance = total_variance(p.data);
  p.C = cfg.nu ? 1.0 / (*cfg.nu * static_cast<double>(n)) : cfg.C.value_or(1.0);
  if (cfg.gamma) {
    p.gamma_heuristic = *cfg.gamma;
  } else {
    if (!(p.variance > 0.0)) throw std::runtime_error("data has zero variance; cannot derive gamma");
    p.gamma_heuristic = heuristic_gamma(cfg.heuristic, n, d, p.variance);
  }
  p.gamma = std::pow(10.0, cfg.gamma_factor) * p.gamma_heuristic;
  return p;
}

ScoreRun score_prepared(const RunConfig& cfg, PreparedRun prepared) {
  ScoreRun run;
  run.prepared = std::move(prepared);
  const DataMatrix& data = run.prepared.data;
  const LabelVector* labels = data.labels ? &*data.labels : nullptr;
  const auto n = static_cast<std::size_t>(data.rows());

  if (cfg.baseline == Baseline::knn) {
    run.scores = knn_scores(data.points, cfg.knn_k, cfg.threads);
  } else {
    CacheOptions cache;
    cache.budget_bytes = cfg.cache_mb << 20;
    KernelContext ctx(data, Kernel::rbf(run.prepared.gamma), cache);
    SolverOptions solver;
    solver.eps = cfg.eps;
    if (cfg.baseline == Baseline::slack) {
      run.scores = slack_scores(ctx, cfg.variant, run.prepared.C, solver);
    } else {
      LosvmOptions opts;
      opts.variant = cfg.variant;
      opts.C = run.prepared.C;
      opts.solver = solver;
      opts.total_removals = cfg.R;
      opts.batches = cfg.b;
      run.losvm = run_losvm(ctx, opts, labels);
      run.scores.resize(n);
      for (std::size_t i = 0; i < n; ++i) run.scores[i] = run.losvm->points[i].score;
    }
  }
  run.report = make_score_report(data.ids, run.scores, labels);
  return run;
}

std::string format_scores_csv(const RunConfig& cfg, const ScoreRun& run) {
  std::unordered_map<std::int64_t, std::size_t> row_of;
  const auto& ids = run.prepared.data.ids;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = i;

  std::string out = "# config: " + config_json(cfg, &run.prepared).dump() + "\n";
  out += "id,score,rank,removed_in_batch,method_tag\n";
  for (const auto& e : run.report.entries) {
    const std::size_t row = row_of.at(e.id);
    const long removed = run.losvm ? run.losvm->points[row].removed_in_batch : -1;
    out += std::to_string(e.id) + ',' + fmt(e.score) + ',' + std::to_string(e.rank) + ',' + std::to_string(removed) +
           ',' + method_tag(cfg, run, row) + '\n';
  }
  return out;
}

std::string format_trace_json(const RunConfig& cfg, const ScoreRun& run) {
  ordered_json j;
  j["config"] = config_json(cfg, &run.prepared);
  if (run.losvm) {
    const RemovalTrace& t = run.losvm->trace;
    j["R"] = t.total_removals;
    j["b"] = t.batch_count;
    j["initial_iterations"] = t.initial_iterations;
    ordered_json batches = ordered_json::array();
    for (const auto& b : t.batches) {
      ordered_json jb;
      jb["batch"] = b.batch;
      jb["support_vectors"] = b.support_vectors;
      jb["leave_out_iterations"] = b.leave_out_iterations;
      jb["solver_iterations"] = b.solver_iterations;
      if (cfg.record_timing) jb["wall_seconds"] = b.wall_seconds;
      ordered_json removed = ordered_json::array();
      for (const auto& r : b.removed) removed.push_back({{"id", r.id}, {"score", r.score}});
      jb["removed"] = std::move(removed);
      batches.push_back(std::move(jb));
    }
    j["batches"] = std::move(batches);
    j["final_scoring_iterations"] = t.final_scoring_iterations;
    j["total_iterations"] = t.total_iterations();
    j["exhausted"] = t.exhausted;
    j["warnings"] = t.warnings;
  } else {
    j["R"] = 0;
    j["b"] = 0;
    j["batches"] = ordered_json::array();
  }
  if (run.report.metrics) {
    const auto& m = *run.report.metrics;
    j["metrics"] = {{"avep", m.avep}, {"adj_avep", m.adj_avep}, {"auroc", m.auroc},
                    {"outliers", run.report.outlier_count}, {"n", run.report.total}};
  } else {
    j["metrics"] = nullptr;
  }
  return j.dump(2) + "\n";
}

ScoreRun cmd_score(const RunConfig& cfg, std::ostream& log) {
  for (const auto& w : validate(cfg)) log << "warning: " << w << '\n';
  ScoreRun run = score_prepared(cfg, prepare(cfg));
  if (run.losvm) {
    for (const auto& w : run.losvm->trace.warnings) log << "warning: " << w << '\n';
  }
  write_file(cfg.output, format_scores_csv(cfg, run));
  write_file(trace_path(cfg), format_trace_json(cfg, run));
  print_metrics(log, run.report);
  return run;
}

std::vector<double> default_gamma_factors() {
  std::vector<double> f;
  for (int q = -4; q <= 4; ++q) f.push_back(q / 4.0);
  return f;
}

std::vector<SweepRow> cmd_sweep_gamma(const RunConfig& cfg, const std::vector<double>& f_values, std::ostream& log) {
  if (f_values.empty()) throw ConfigError("sweep requires at least one gamma factor");
  for (const auto& w : validate(cfg)) log << "warning: " << w << '\n';
  const PreparedRun base = prepare(cfg);
  if (!base.data.labels || base.data.outlier_count() == 0 || base.data.outlier_count() == base.data.rows()) {
    throw std::runtime_error("gamma sweep needs labeled data with both outliers and inliers");
  }
  std::vector<SweepRow> rows;
  for (const double f : f_values) {
    RunConfig c = cfg;
    c.gamma_factor = f;
    PreparedRun p = base;
    p.gamma = std::pow(10.0, f) * p.gamma_heuristic;
    const ScoreRun run = score_prepared(c, std::move(p));
    const auto& m = *run.report.metrics;
    rows.push_back({f, run.prepared.gamma, m.avep, m.adj_avep, m.auroc});
    log << "f=" << fmt(f) << " gamma=" << fmt(run.prepared.gamma) << " AdjAveP=" << fmt(m.adj_avep)
        << " AUROC=" << fmt(m.auroc) << '\n';
  }
  write_file(cfg.output, format_sweep_csv(cfg, rows));
  return rows;
}

std::string format_sweep_csv(const RunConfig& cfg, const std::vector<SweepRow>& rows) {
  ordered_json c = config_json(cfg, nullptr);
  c.erase("gamma_factor");
  std::string out = "# config: " + c.dump() + "\n";
  out += "f,gamma,avep,adj_avep,auroc\n";
  for (const auto& r : rows) {
    out += fmt(r.f) + ',' + fmt(r.gamma) + ',' + fmt(r.avep) + ',' + fmt(r.adj_avep) + ',' + fmt(r.auroc) + '\n';
  }
  return out;
}

DataMatrix cmd_synth(std::size_t n_cluster, std::size_t n_noise, std::uint64_t seed,
                     const std::filesystem::path& path) {
  DataMatrix m = synth_dirty(n_cluster, n_noise, seed);
  write_file(path, format_csv(m));
  return m;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Leave-out one-class SVM / SVDD outlier detection"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string input;
  std::string output = "scores.csv";
  std::string trace;
  std::string label;
  std::string variant = "svdd";
  std::string heuristic = "silverman";
  std::string baseline = "none";
  double nu = 0.0;
  double C = 0.0;
  double gamma = 0.0;
  bool no_dedup = false;
  std::vector<double> f_values = default_gamma_factors();

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("-i,--input", input, "Input CSV file")->required();
    sub->add_option("--label-column", label, "Ground-truth outlier column (0/1 or no/yes)");
    sub->add_option("--variant", variant, "ocsvm or svdd")
        ->check(CLI::IsMember({"ocsvm", "svdd"}))
        ->capture_default_str();
    auto* nu_opt = sub->add_option("--nu", nu, "Outlier fraction nu; C = 1/(nu N)");
    auto* c_opt = sub->add_option("--C", C, "Box bound C (default 1)");
    nu_opt->excludes(c_opt);
    sub->add_option("--gamma", gamma, "Explicit RBF gamma (overrides the heuristic)");
    sub->add_option("--gamma-heuristic", heuristic, "scott, sklearn or silverman")
        ->check(CLI::IsMember({"scott", "sklearn", "silverman"}))
        ->capture_default_str();
    sub->add_option("--gamma-factor", cfg.gamma_factor, "f in gamma = 10^f * heuristic")->capture_default_str();
    sub->add_option("--R", cfg.R, "Total number of points to remove")->capture_default_str();
    sub->add_option("--b", cfg.b, "Number of removal batches")->capture_default_str();
    sub->add_option("--eps", cfg.eps, "KKT gap tolerance")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Seed recorded with the run")->capture_default_str();
    sub->add_option("-o,--output", output, "Output file")->capture_default_str();
    sub->add_option("--baseline", baseline, "none, knn or slack")
        ->check(CLI::IsMember({"none", "knn", "slack"}))
        ->capture_default_str();
    sub->add_option("--knn-k", cfg.knn_k, "k for the KNN baseline")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "Worker threads (wall time only)")->capture_default_str();
    sub->add_option("--cache-mb", cfg.cache_mb, "Kernel cache budget in MiB")->capture_default_str();
    sub->add_flag("--no-dedup", no_dedup, "Keep exact duplicate rows");
  };

  auto* score = app.add_subcommand("score", "Score points and write scores CSV plus trace JSON");
  add_run_options(score);
  score->add_option("--trace", trace, "Trace JSON path (default <output>.trace.json)");
  score->add_flag("--timing", cfg.record_timing, "Record per-batch wall time in the trace");

  auto* sweep = app.add_subcommand("sweep-gamma", "Evaluate a grid of gamma factors on labeled data");
  add_run_options(sweep);
  sweep->add_option("--f-values", f_values, "Gamma factors (default -1 to 1 in steps of 0.25)");

  std::size_t n_cluster = 200;
  std::size_t n_noise = 25;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synth.csv";
  auto* synth = app.add_subcommand("synth", "Write the two-Gaussians-plus-noise dataset");
  synth->add_option("--n-cluster", n_cluster, "Cluster points (split over two clusters)")->capture_default_str();
  synth->add_option("--n-noise", n_noise, "Uniform noise points (labeled outliers)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("-o,--output", synth_out, "Output CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      const DataMatrix m = cmd_synth(n_cluster, n_noise, synth_seed, synth_out);
      out << "wrote " << m.rows() << " rows (" << m.outlier_count() << " outliers) to " << synth_out << '\n';
      return 0;
    }
    cfg.input = input;
    cfg.output = output;
    if (!trace.empty()) cfg.trace_output = trace;
    if (!label.empty()) cfg.label_column = label;
    cfg.variant = parse_variant(variant);
    if (heuristic == "scott") cfg.heuristic = GammaHeuristic::scott;
    if (heuristic == "sklearn") cfg.heuristic = GammaHeuristic::sklearn;
    if (baseline == "knn") cfg.baseline = Baseline::knn;
    if (baseline == "slack") cfg.baseline = Baseline::slack;
    auto* active = score->parsed() ? score : sweep;
    if (active->count("--nu") > 0) cfg.nu = nu;
    if (active->count("--C") > 0) cfg.C = C;
    if (active->count("--gamma") > 0) cfg.gamma = gamma;
    cfg.deduplicate = !no_dedup;
    validate(cfg);

    if (score->parsed()) {
      cmd_score(cfg, out);
    } else {
      cmd_sweep_gamma(cfg, f_values, out);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace losvm
