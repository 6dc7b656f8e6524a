#include "geomala/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "geomala/error.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// config parsing

class LineFinder {
 public:
  explicit LineFinder(const std::string& text) : text_(text) {}

  int line_at(std::size_t pos) const {
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(std::min(pos, text_.size())), '\n'));
  }

  // Line of `"key"` after the first `"section"`. Best effort: duplicates
  // resolve to the first occurrence.
  int line_of(const std::string& section, const std::string& key) const {
    std::size_t from = 0;
    if (!section.empty()) {
      from = text_.find("\"" + section + "\"");
      if (from == std::string::npos) from = 0;
    }
    return line_at(text_.find("\"" + key + "\"", from));
  }

 private:
  const std::string& text_;
};

struct Section {
  const json& obj;
  std::string name;
  const LineFinder& lines;

  void allow(std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) throw ConfigError(fmt::format("section '{}' must be an object", name), lines.line_of("", name));
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        throw ConfigError(fmt::format("unknown key '{}' in section '{}'", it.key(), name), lines.line_of(name, it.key()));
      }
    }
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("key '{}' in section '{}': {}", key, name, e.what()), lines.line_of(name, key));
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) const {
    if (!obj.contains(key)) return;
    T value{};
    get(key, value);
    out = value;
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError(fmt::format("key '{}' in section '{}': {}", key, name, what), lines.line_of(name, key));
  }
};

MetricSpec parse_metric(const Section& s) {
  s.allow({"kind", "alpha", "delta", "max_iter", "derivatives", "fd_step", "matrix", "matrix_file"});
  MetricSpec m;
  s.get("kind", m.kind);
  s.get("alpha", m.alpha);
  s.get("delta", m.delta);
  s.get("max_iter", m.max_iter);
  s.get("derivatives", m.derivatives);
  s.get("fd_step", m.fd_step);
  s.get("matrix", m.matrix);
  s.get("matrix_file", m.matrix_file);
  try {
    parse_metric_kind(m.kind);
  } catch (const UsageError& e) {
    s.fail("kind", e.what());
  }
  if (m.derivatives != "analytic" && m.derivatives != "finite_difference") {
    s.fail("derivatives", "expected 'analytic' or 'finite_difference'");
  }
  if (!(m.alpha > 0.0)) s.fail("alpha", "must be positive");
  if (m.delta < 0.0) s.fail("delta", "must be non-negative");
  if (!(m.fd_step > 0.0)) s.fail("fd_step", "must be positive");
  return m;
}

KernelSpec parse_kernel(const Section& s) {
  s.allow({"kind", "lambda", "lambda_grid", "target_acceptance", "sigma", "sigma_file", "metric"});
  KernelSpec k;
  s.get("kind", k.kind);
  s.get("lambda", k.lambda);
  s.get("lambda_grid", k.lambda_grid);
  s.get("target_acceptance", k.target_acceptance);
  s.get("sigma", k.sigma);
  s.get("sigma_file", k.sigma_file);
  try {
    parse_kernel_kind(k.kind);
  } catch (const UsageError& e) {
    s.fail("kind", e.what());
  }
  if (!(k.lambda > 0.0)) s.fail("lambda", "must be positive");
  for (double l : k.lambda_grid)
    if (!(l > 0.0)) s.fail("lambda_grid", "entries must be positive");
  if (k.target_acceptance && !(*k.target_acceptance > 0.0 && *k.target_acceptance < 1.0)) {
    s.fail("target_acceptance", "must lie in (0, 1)");
  }
  if (s.obj.contains("metric")) k.metric = parse_metric(Section{s.obj.at("metric"), "metric", s.lines});
  return k;
}

MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, const std::string& what) {
  if (rows.empty()) return {};
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw UsageError(what + ": ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open matrix file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw UsageError(fmt::format("{}:{}: non-numeric entry", path, line_no));
    }
    rows.push_back(std::move(row));
  }
  return to_matrix(rows, path);
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << j.dump(2) << '\n';
}

bool wants(const OutputSpec& out, const char* format) {
  return std::find(out.formats.begin(), out.formats.end(), format) != out.formats.end();
}

VectorXd start_point(const RunSpec& run, Index n, std::uint64_t chain) {
  VectorXd x0 = VectorXd::Zero(n);
  if (run.x0.size() == 1) {
    x0.setConstant(run.x0.front());
  } else if (!run.x0.empty()) {
    if (static_cast<Index>(run.x0.size()) != n) {
      throw UsageError(fmt::format("run.x0 has {} entries, target dimension is {}", run.x0.size(), n));
    }
    for (Index i = 0; i < n; ++i) x0[i] = run.x0[static_cast<std::size_t>(i)];
  }
  if (run.x0_scale > 0.0) {
    RandomStream rng = RandomStream(run.seed, chain).split(0x5EED);
    x0 += run.x0_scale * rng.normal_vector(n);
  }
  return x0;
}

RunOptions options_from(const RunSpec& run) {
  RunOptions o;
  o.steps = run.m;
  o.burn_in = run.burn_in_or_default();
  o.thin = run.thin;
  o.seed = run.seed;
  return o;
}

SummaryConfig summary_config(const ExperimentConfig& cfg, const TargetModel& target) {
  SummaryConfig s;
  s.epsilon = cfg.run.epsilon;
  if (cfg.tv.enabled && target.dim() <= 2) s.tv_target = &target;
  s.tv_grid = cfg.tv.grid;
  return s;
}

struct ChainBatch {
  std::vector<Trace> traces;
  std::vector<std::string> failures;
};

ChainBatch run_batch(const TargetModel& target, const ProposalKernel& kernel, const RunSpec& run) {
  ChainBatch batch;
  const Index n = target.dim();
  auto outcomes = run_chains(target, kernel, [&](std::uint64_t c) { return start_point(run, n, c); },
                             options_from(run), run.chains, thread_budget());
  for (std::size_t c = 0; c < outcomes.size(); ++c) {
    if (outcomes[c].trace) {
      batch.traces.push_back(std::move(*outcomes[c].trace));
    } else {
      batch.failures.push_back(fmt::format("chain {}: {}", c, outcomes[c].error));
    }
  }
  return batch;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  LineFinder lines(text);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("malformed JSON: {}", e.what()), lines.line_at(e.byte > 0 ? e.byte - 1 : 0));
  }
  ExperimentConfig cfg;
  const Section top{root, "", lines};
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object", 1);
  for (auto it = root.begin(); it != root.end(); ++it) {
    static const char* known[] = {"target", "kernel", "metric", "run", "output", "tv", "scaling", "diffusion", "compare"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(fmt::format("unknown top-level key '{}'", it.key()), lines.line_of("", it.key()));
    }
  }

  if (root.contains("target")) {
    const Section s{root.at("target"), "target", lines};
    s.allow({"name", "dim", "mean", "cov", "beta", "data", "rows", "data_seed", "prior_var"});
    auto& t = cfg.target;
    s.get("name", t.name);
    s.get("dim", t.dim);
    s.get("mean", t.mean);
    s.get("cov", t.cov);
    s.get("beta", t.beta);
    s.get("data", t.data);
    s.get("rows", t.rows);
    s.get("data_seed", t.data_seed);
    s.get("prior_var", t.prior_var);
    static const char* names[] = {"StdGaussian", "Gaussian", "CauchyProduct", "QuarticProduct", "ExpPower", "BayesLogistic"};
    if (std::none_of(std::begin(names), std::end(names), [&](const char* k) { return t.name == k; })) {
      s.fail("name", "unknown target '" + t.name + "'");
    }
    if (t.dim < 1) s.fail("dim", "must be a positive integer");
    if (!(t.beta > 0.0)) s.fail("beta", "must be positive");
    if (!(t.prior_var > 0.0)) s.fail("prior_var", "must be positive");
    if (t.name == "Gaussian" && t.mean.empty()) s.fail("mean", "Gaussian target needs a mean vector");
    if (t.name == "BayesLogistic" && t.data.empty() && t.rows < 1) {
      s.fail("data", "BayesLogistic needs a data file or a positive 'rows' for synthetic data");
    }
  }
  if (root.contains("metric")) cfg.metric = parse_metric(Section{root.at("metric"), "metric", lines});
  if (root.contains("kernel")) {
    cfg.kernel = parse_kernel(Section{root.at("kernel"), "kernel", lines});
    if (cfg.kernel.metric) cfg.metric = *cfg.kernel.metric;
  }
  if (root.contains("run")) {
    const Section s{root.at("run"), "run", lines};
    s.allow({"m", "burn_in", "thin", "chains", "seed", "x0", "x0_scale", "epsilon"});
    auto& r = cfg.run;
    s.get("m", r.m);
    s.get("burn_in", r.burn_in);
    s.get("thin", r.thin);
    s.get("chains", r.chains);
    s.get("seed", r.seed);
    if (s.obj.contains("x0") && s.obj.at("x0").is_number()) {
      double v = 0.0;
      s.get("x0", v);
      r.x0 = {v};
    } else {
      s.get("x0", r.x0);
    }
    s.get("x0_scale", r.x0_scale);
    s.get("epsilon", r.epsilon);
    if (r.m < 1) s.fail("m", "must be positive");
    if (r.burn_in && (*r.burn_in < 0 || *r.burn_in >= r.m)) s.fail("burn_in", "must satisfy 0 <= burn_in < m");
    if (r.thin < 1) s.fail("thin", "must be a positive integer");
    if (r.chains < 1) s.fail("chains", "must be a positive integer");
    if (r.x0_scale < 0.0) s.fail("x0_scale", "must be non-negative");
    if (!(r.epsilon > 0.0)) s.fail("epsilon", "must be positive");
  }
  if (root.contains("output")) {
    const Section s{root.at("output"), "output", lines};
    s.allow({"dir", "formats"});
    s.get("dir", cfg.output.dir);
    s.get("formats", cfg.output.formats);
  }
  if (root.contains("tv")) {
    const Section s{root.at("tv"), "tv", lines};
    s.allow({"enabled", "lo", "hi", "bins"});
    s.get("enabled", cfg.tv.enabled);
    s.get("lo", cfg.tv.grid.lo);
    s.get("hi", cfg.tv.grid.hi);
    s.get("bins", cfg.tv.grid.bins);
    if (!(cfg.tv.grid.hi > cfg.tv.grid.lo)) s.fail("hi", "must exceed lo");
    if (cfg.tv.grid.bins < 1) s.fail("bins", "must be positive");
  }
  if (root.contains("scaling")) {
    const Section s{root.at("scaling"), "scaling", lines};
    s.allow({"dims", "lambda_lo", "lambda_hi", "iterations"});
    s.get("dims", cfg.scaling.dims);
    s.get("lambda_lo", cfg.scaling.lambda_lo);
    s.get("lambda_hi", cfg.scaling.lambda_hi);
    s.get("iterations", cfg.scaling.iterations);
    if (cfg.scaling.dims.empty()) s.fail("dims", "must list at least one dimension");
    for (long d : cfg.scaling.dims)
      if (d < 1) s.fail("dims", "dimensions must be positive");
    if (!(cfg.scaling.lambda_lo > 0.0 && cfg.scaling.lambda_hi > cfg.scaling.lambda_lo)) {
      s.fail("lambda_hi", "need 0 < lambda_lo < lambda_hi");
    }
  }
  if (root.contains("diffusion")) {
    const Section s{root.at("diffusion"), "diffusion", lines};
    s.allow({"process", "lo", "hi", "points", "h"});
    auto& d = cfg.diffusion;
    s.get("process", d.process);
    s.get("lo", d.lo);
    s.get("hi", d.hi);
    s.get("points", d.points);
    s.get("h", d.h);
    if (d.process != "Langevin" && d.process != "ManifoldLangevin") {
      s.fail("process", "expected 'Langevin' or 'ManifoldLangevin'");
    }
    if (d.points < 1) s.fail("points", "must be positive");
    if (!(d.h > 0.0)) s.fail("h", "must be positive");
  }
  if (root.contains("compare")) {
    const json& list = root.at("compare");
    if (!list.is_array()) throw ConfigError("'compare' must be an array of kernel objects", lines.line_of("", "compare"));
    for (const auto& entry : list) cfg.compare.push_back(parse_kernel(Section{entry, "compare", lines}));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

TargetPtr build_target(const TargetSpec& t) {
  if (t.name == "StdGaussian") return std::make_shared<StdGaussian>(t.dim);
  if (t.name == "CauchyProduct") return std::make_shared<CauchyProduct>(t.dim);
  if (t.name == "QuarticProduct") return std::make_shared<QuarticProduct>(t.dim);
  if (t.name == "ExpPower") return std::make_shared<ExpPower>(t.dim, t.beta);
  if (t.name == "Gaussian") {
    VectorXd mean = Eigen::Map<const VectorXd>(t.mean.data(), static_cast<Index>(t.mean.size()));
    MatrixXd cov = t.cov.empty() ? MatrixXd::Identity(mean.size(), mean.size()) : to_matrix(t.cov, "target.cov");
    return std::make_shared<Gaussian>(std::move(mean), cov);
  }
  if (t.name == "BayesLogistic") {
    if (!t.data.empty()) return std::make_shared<BayesLogistic>(BayesLogistic::from_csv(t.data, t.prior_var));
    return std::make_shared<BayesLogistic>(BayesLogistic::synthetic(t.rows, t.dim, t.prior_var, t.data_seed));
  }
  throw UsageError("unknown target '" + t.name + "'");
}

MetricField build_metric(const MetricSpec& m) {
  MetricField f;
  f.kind = parse_metric_kind(m.kind);
  f.alpha = m.alpha;
  f.delta = m.delta;
  f.max_iter = m.max_iter;
  f.fd_step = m.fd_step;
  f.derivatives = m.derivatives == "finite_difference" ? DerivativeMode::FiniteDifference : DerivativeMode::Analytic;
  if (f.kind == MetricKind::Constant) {
    f.constant = !m.matrix_file.empty() ? read_matrix_csv(m.matrix_file) : to_matrix(m.matrix, "metric.matrix");
    if (f.constant.size() == 0) throw UsageError("Constant metric needs 'matrix' or 'matrix_file'");
  }
  return f;
}

ProposalKernel build_kernel(const KernelSpec& k, const MetricField& metric) {
  MatrixXd sigma = !k.sigma_file.empty() ? read_matrix_csv(k.sigma_file) : to_matrix(k.sigma, "kernel.sigma");
  return ProposalKernel(parse_kernel_kind(k.kind), k.lambda, std::move(sigma), metric);
}

double default_target_acceptance(KernelKind kind) {
  return kind == KernelKind::RWM || kind == KernelKind::ManifoldRWM ? 0.234 : 0.574;
}

int thread_budget() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("GEOMALA_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) return cap;
    } catch (const std::exception&) {
    }
  }
  return hw;
}

json summary_to_json(const DiagnosticsSummary& s, std::uint64_t seed) {
  json tau = json::object();
  json ess = json::object();
  for (const auto& f : s.functions) {
    tau[f.name] = f.tau;
    ess[f.name] = f.ess;
  }
  json out;
  out["acceptance_rate"] = s.acceptance_rate;
  out["tau"] = tau;
  out["ess"] = ess;
  out["tv"] = s.tv_estimate ? json(*s.tv_estimate) : json(nullptr);
  out["seed"] = seed;
  out["wall_time_s"] = s.wall_time_s;
  return out;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  std::string line = "iter,accepted,log_pi";
  for (Index i = 0; i < trace.dim(); ++i) line += fmt::format(",x{}", i + 1);
  out << line << '\n';
  for (std::size_t r = 0; r < trace.size(); ++r) {
    line = fmt::format("{},{},{}", trace.iterations[r], trace.accepted[r] ? 1 : 0, format_double(trace.log_pis[r]));
    for (Index i = 0; i < trace.dim(); ++i) {
      line += ',';
      line += format_double(trace.states[r][i]);
    }
    out << line << '\n';
  }
}

RunReport cmd_run(const ExperimentConfig& cfg, bool write_files) {
  const TargetPtr target = build_target(cfg.target);
  const ProposalKernel kernel = build_kernel(cfg.kernel, build_metric(cfg.metric));
  ChainBatch batch = run_batch(*target, kernel, cfg.run);
  RunReport report;
  report.failures = std::move(batch.failures);
  report.traces = std::move(batch.traces);
  if (!report.traces.empty()) {
    report.summary = summarize_chains(report.traces, summary_config(cfg, *target));
    report.summary_json = summary_to_json(*report.summary, cfg.run.seed);
  }
  if (write_files) {
    ensure_dir(cfg.output.dir);
    if (wants(cfg.output, "csv")) {
      for (const auto& t : report.traces) {
        write_trace_csv(t, (std::filesystem::path(cfg.output.dir) / fmt::format("trace_c{}.csv", t.chain)).string());
      }
    }
    if (wants(cfg.output, "json") && report.summary) {
      write_json(report.summary_json, (std::filesystem::path(cfg.output.dir) / "summary.json").string());
    }
  }
  return report;
}

json cmd_tune(const ExperimentConfig& cfg, bool write_files) {
  const TargetPtr target = build_target(cfg.target);
  const ProposalKernel base = build_kernel(cfg.kernel, build_metric(cfg.metric));
  const double goal = cfg.kernel.target_acceptance.value_or(default_target_acceptance(base.kind()));
  std::vector<double> grid = cfg.kernel.lambda_grid;
  if (grid.empty()) grid = {cfg.kernel.lambda};

  json report;
  report["kernel"] = to_string(base.kind());
  report["metric"] = base.needs_metric() ? base.metric().describe() : "none";
  report["target"] = target->name();
  report["target_acceptance"] = goal;
  report["seed"] = cfg.run.seed;
  json warnings = json::array();
  if (grid.size() < 3) {
    warnings.push_back(fmt::format("lambda grid has {} value(s); at least 3 are recommended", grid.size()));
  }
  json rows = json::array();
  json failures = json::array();
  double best_gap = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ProposalKernel kernel = base.with_lambda(grid[i]);
    ChainBatch batch = run_batch(*target, kernel, cfg.run);
    for (auto& f : batch.failures) failures.push_back(fmt::format("lambda={}: {}", grid[i], f));
    if (batch.traces.empty()) continue;
    SummaryConfig sc;
    sc.epsilon = cfg.run.epsilon;
    const DiagnosticsSummary s = summarize_chains(batch.traces, sc);
    json ess = json::object();
    for (const auto& f : s.functions) ess[f.name] = f.ess;
    rows.push_back({{"lambda", grid[i]}, {"acceptance_rate", s.acceptance_rate}, {"ess", ess},
                    {"ess_min", s.worst().ess}, {"wall_time_s", s.wall_time_s}});
    const double gap = std::abs(s.acceptance_rate - goal);
    if (gap < best_gap) {
      best_gap = gap;
      best = rows.size() - 1;
    }
  }
  report["grid"] = rows;
  if (best) {
    report["selected_index"] = *best;
    report["selected_lambda"] = rows[*best]["lambda"];
    report["selected_acceptance"] = rows[*best]["acceptance_rate"];
  } else {
    report["selected_index"] = nullptr;
    report["selected_lambda"] = nullptr;
    report["selected_acceptance"] = nullptr;
  }
  report["warnings"] = warnings;
  report["failures"] = failures;
  if (write_files) {
    ensure_dir(cfg.output.dir);
    write_json(report, (std::filesystem::path(cfg.output.dir) / "tuning.json").string());
  }
  return report;
}

std::optional<double> log_log_slope(const std::vector<double>& dims, const std::vector<double>& lambdas) {
  if (dims.size() < 2 || dims.size() != lambdas.size()) return std::nullopt;
  const auto k = static_cast<double>(dims.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double x = std::log(dims[i]);
    const double y = std::log(lambdas[i] * lambdas[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = k * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) return std::nullopt;
  return (k * sxy - sx * sy) / denom;
}

json cmd_scaling(const ExperimentConfig& cfg, bool write_files) {
  const ProposalKernel base = build_kernel(cfg.kernel, build_metric(cfg.metric));
  const double goal = cfg.kernel.target_acceptance.value_or(default_target_acceptance(base.kind()));
  if (cfg.target.name == "Gaussian" || cfg.target.name == "BayesLogistic") {
    throw UsageError("scaling: target must be an iid product (StdGaussian, CauchyProduct, QuarticProduct, ExpPower)");
  }
  json rows = json::array();
  json failures = json::array();
  std::vector<double> dims, lambdas;
  for (long n : cfg.scaling.dims) {
    TargetSpec ts = cfg.target;
    ts.dim = n;
    const TargetPtr target = build_target(ts);
    auto acceptance = [&](double lambda) -> std::optional<double> {
      ChainBatch batch = run_batch(*target, base.with_lambda(lambda), cfg.run);
      for (auto& f : batch.failures) failures.push_back(fmt::format("n={} lambda={}: {}", n, lambda, f));
      if (batch.traces.empty()) return std::nullopt;
      double acc = 0.0;
      for (const auto& t : batch.traces) acc += t.acceptance_rate();
      return acc / static_cast<double>(batch.traces.size());
    };
    // acceptance decreases in lambda; bisect in log space
    double lo = std::log(cfg.scaling.lambda_lo);
    double hi = std::log(cfg.scaling.lambda_hi);
    bool ok = true;
    for (int it = 0; it < cfg.scaling.iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      const auto acc = acceptance(std::exp(mid));
      if (!acc) {
        ok = false;
        break;
      }
      (*acc > goal ? lo : hi) = mid;
    }
    if (!ok) continue;
    const double lambda = std::exp(0.5 * (lo + hi));
    const auto acc = acceptance(lambda);
    rows.push_back({{"n", n}, {"lambda", lambda}, {"lambda_sq", lambda * lambda},
                    {"acceptance_rate", acc ? json(*acc) : json(nullptr)}});
    dims.push_back(static_cast<double>(n));
    lambdas.push_back(lambda);
  }
  json report;
  report["kernel"] = to_string(base.kind());
  report["target"] = cfg.target.name;
  report["target_acceptance"] = goal;
  report["seed"] = cfg.run.seed;
  report["dims"] = rows;
  const auto slope = log_log_slope(dims, lambdas);
  report["slope"] = slope ? json(*slope) : json(nullptr);
  report["failures"] = failures;
  if (write_files) {
    ensure_dir(cfg.output.dir);
    write_json(report, (std::filesystem::path(cfg.output.dir) / "scaling.json").string());
  }
  return report;
}

json cmd_compare(const ExperimentConfig& cfg, bool write_files) {
  const TargetPtr target = build_target(cfg.target);
  std::vector<KernelSpec> kernels = cfg.compare;
  if (kernels.empty()) kernels.push_back(cfg.kernel);
  json rows = json::array();
  json failures = json::array();
  std::string csv = "kernel,metric,lambda,acceptance_rate,ess_min,wall_time_s,ess_per_second\n";
  for (const auto& spec : kernels) {
    const MetricField metric = build_metric(spec.metric.value_or(cfg.metric));
    const ProposalKernel kernel = build_kernel(spec, metric);
    ChainBatch batch = run_batch(*target, kernel, cfg.run);
    for (auto& f : batch.failures) failures.push_back(fmt::format("{}: {}", kernel.describe(), f));
    if (batch.traces.empty()) continue;
    SummaryConfig sc;
    sc.epsilon = cfg.run.epsilon;
    const DiagnosticsSummary s = summarize_chains(batch.traces, sc);
    const std::string metric_name = kernel.needs_metric() ? metric.describe() : "none";
    const double ess_min = s.worst().ess;
    const double per_second = s.wall_time_s > 0.0 ? ess_min / s.wall_time_s : 0.0;
    rows.push_back({{"kernel", to_string(kernel.kind())}, {"metric", metric_name}, {"lambda", kernel.lambda()},
                    {"acceptance_rate", s.acceptance_rate}, {"ess_min", ess_min}, {"wall_time_s", s.wall_time_s},
                    {"ess_per_second", per_second}});
    csv += fmt::format("{},{},{},{},{},{},{}\n", to_string(kernel.kind()), metric_name, format_double(kernel.lambda()),
                       format_double(s.acceptance_rate), format_double(ess_min), format_double(s.wall_time_s),
                       format_double(per_second));
  }
  json report;
  report["target"] = target->name();
  report["seed"] = cfg.run.seed;
  report["rows"] = rows;
  report["failures"] = failures;
  if (write_files) {
    ensure_dir(cfg.output.dir);
    write_json(report, (std::filesystem::path(cfg.output.dir) / "compare.json").string());
    std::ofstream out(std::filesystem::path(cfg.output.dir) / "compare.csv");
    out << csv;
  }
  return report;
}

DiffusionCheckReport cmd_diffusion_check(const ExperimentConfig& cfg, bool write_files) {
  const TargetPtr target = build_target(cfg.target);
  const auto& d = cfg.diffusion;
  const Index n = target->dim();
  if (n > 2) throw UsageError("diffusion-check: residual grids are limited to 1-D and 2-D targets");
  const DiffusionSpec spec = d.process == "Langevin" ? DiffusionSpec::langevin(target)
                                                     : DiffusionSpec::manifold_langevin(target, build_metric(cfg.metric));
  std::vector<double> axis;
  for (int i = 0; i < d.points; ++i) {
    axis.push_back(d.points == 1 ? d.lo : d.lo + (d.hi - d.lo) * i / (d.points - 1));
  }
  DiffusionCheckReport report;
  for (double a : axis) {
    if (n == 1) {
      report.points.push_back(VectorXd::Constant(1, a));
    } else {
      for (double b : axis) report.points.push_back((VectorXd(2) << a, b).finished());
    }
  }
  for (const auto& x : report.points) {
    const double r = fokker_planck_residual(*target, spec, x, d.h);
    report.residuals.push_back(r);
    report.max_residual = std::max(report.max_residual, r);
  }
  if (write_files) {
    ensure_dir(cfg.output.dir);
    std::ofstream out(std::filesystem::path(cfg.output.dir) / "residuals.csv");
    std::string header;
    for (Index i = 0; i < n; ++i) header += fmt::format("x{},", i + 1);
    out << header << "residual\n";
    for (std::size_t p = 0; p < report.points.size(); ++p) {
      std::string line;
      for (Index i = 0; i < n; ++i) line += format_double(report.points[p][i]) + ",";
      out << line << format_double(report.residuals[p]) << '\n';
    }
  }
  return report;
}

}  // namespace geomala
