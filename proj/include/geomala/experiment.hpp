#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "geomala/diagnostics.hpp"
#include "geomala/diffusion.hpp"
#include "geomala/metrics.hpp"
#include "geomala/samplers.hpp"
#include "geomala/targets.hpp"

namespace geomala {

struct TargetSpec {
  std::string name = "StdGaussian";
  long dim = 1;
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;
  double beta = 2.0;
  std::string data;          // BayesLogistic CSV (x1..xn,y)
  long rows = 0;             // BayesLogistic synthetic design rows when no data file
  std::uint64_t data_seed = 1;
  double prior_var = 100.0;
};

struct MetricSpec {
  std::string kind = "Identity";
  double alpha = 1e6;
  double delta = 1e-8;
  int max_iter = 100;
  std::string derivatives = "analytic";  // or "finite_difference"
  double fd_step = 1e-5;
  std::vector<std::vector<double>> matrix;
  std::string matrix_file;
};

struct KernelSpec {
  std::string kind = "RWM";
  double lambda = 1.0;
  std::vector<double> lambda_grid;
  std::optional<double> target_acceptance;
  std::vector<std::vector<double>> sigma;
  std::string sigma_file;
  std::optional<MetricSpec> metric;  // per-kernel override (compare)
};

struct RunSpec {
  long m = 10000;
  std::optional<long> burn_in;  // default m / 10
  long thin = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  std::vector<double> x0;       // empty: origin; one entry: broadcast
  double x0_scale = 0.0;        // > 0: x0 + x0_scale * N(0, I) per chain
  double epsilon = 0.05;

  long burn_in_or_default() const { return burn_in.value_or(m / 10); }
};

struct OutputSpec {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv", "json"};
};

struct TvSpec {
  bool enabled = true;  // only applies to 1-D / 2-D targets
  TvGrid grid;
};

struct ScalingSpec {
  std::vector<long> dims = {2, 4, 8, 16, 32, 64};
  double lambda_lo = 1e-3;
  double lambda_hi = 20.0;
  int iterations = 16;
};

struct DiffusionCheckSpec {
  std::string process = "Langevin";  // or "ManifoldLangevin"
  double lo = -2.0;
  double hi = 2.0;
  int points = 21;
  double h = 1e-3;
};

struct ExperimentConfig {
  TargetSpec target;
  KernelSpec kernel;
  MetricSpec metric;
  RunSpec run;
  OutputSpec output;
  TvSpec tv;
  ScalingSpec scaling;
  DiffusionCheckSpec diffusion;
  std::vector<KernelSpec> compare;
  bool quiet = false;
};

/// Parses and validates a JSON configuration; unknown keys are rejected
/// and errors carry the line of the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

TargetPtr build_target(const TargetSpec& spec);
MetricField build_metric(const MetricSpec& spec);
ProposalKernel build_kernel(const KernelSpec& spec, const MetricField& metric);
/// Default acceptance target for a kernel family: 0.234 for random-walk
/// kernels and 0.574 for Langevin kernels.
double default_target_acceptance(KernelKind kind);

/// Worker pool size: GEOMALA_THREADS when set, else hardware concurrency.
int thread_budget();

struct RunReport {
  std::vector<Trace> traces;
  std::vector<std::string> failures;  // "chain c: message"
  std::optional<DiagnosticsSummary> summary;
  nlohmann::json summary_json;
};

/// JSON form of a summary: acceptance_rate, tau, ess, tv, seed, wall_time_s.
nlohmann::json summary_to_json(const DiagnosticsSummary& summary, std::uint64_t seed);
void write_trace_csv(const Trace& trace, const std::string& path);

RunReport cmd_run(const ExperimentConfig& config, bool write_files = true);
nlohmann::json cmd_tune(const ExperimentConfig& config, bool write_files = true);
nlohmann::json cmd_scaling(const ExperimentConfig& config, bool write_files = true);
nlohmann::json cmd_compare(const ExperimentConfig& config, bool write_files = true);

struct DiffusionCheckReport {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> residuals;
  double max_residual = 0.0;
};
DiffusionCheckReport cmd_diffusion_check(const ExperimentConfig& config, bool write_files = true);

/// Least-squares slope of log(lambda^2) against log(n); nullopt for < 2 points.
std::optional<double> log_log_slope(const std::vector<double>& dims, const std::vector<double>& lambdas);

}  // namespace geomala
