#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geomala/samplers.hpp"
#include "geomala/targets.hpp"

namespace geomala {

/// Sample autocorrelation at `lag`, normalised by the series length.
/// A constant series has autocorrelation 0 at every positive lag.
double autocorrelation(std::span<const double> series, long lag);

/// Autocorrelations for lags 0..max_lag via FFT.
std::vector<double> autocorrelations(std::span<const double> series, long max_lag);

struct ActResult {
  double tau = 1.0;
  long p = 0;            // first lag with |rho| < epsilon (or the lag the sum stopped at)
  bool warning = false;  // no such lag below length/2, or a degenerate series
};

/// tau = 1 + 2 sum_{i=1}^{p-1} rho_i, with p the first lag where
/// |rho_p| < epsilon. Floored at 0.1.
ActResult act_time(std::span<const double> series, double epsilon = 0.05);

struct EssResult {
  double ess = 0.0;
  ActResult act;
};

/// m / tau.
EssResult ess(std::span<const double> series, double epsilon = 0.05);

struct TvGrid {
  double lo = -4.0;
  double hi = 4.0;
  int bins = 50;
};

struct TvResult {
  double tv = 0.0;
  bool out_of_range = false;  // some samples were lumped into boundary bins
};

/// 1/2 sum_bins |p_hat - p| for 1-D or 2-D samples (one per row) against the
/// target density integrated by the midpoint rule and renormalised over the
/// grid (a bins x bins grid in 2-D).
TvResult empirical_tv(const Eigen::MatrixXd& samples, const TargetModel& target, const TvGrid& grid);

struct SummaryConfig {
  double epsilon = 0.05;
  const TargetModel* tv_target = nullptr;  // TV is computed when set and dim <= 2
  TvGrid tv_grid;
};

struct FunctionDiagnostics {
  std::string name;  // "x1".."xn" or "norm2"
  double tau = 1.0;
  double ess = 0.0;
  long p = 0;
  bool warning = false;
};

struct DiagnosticsSummary {
  double acceptance_rate = 0.0;
  std::vector<FunctionDiagnostics> functions;  // coordinates, then ||x||^2
  long n_lags_used = 0;                        // largest truncation lag over functions
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  std::optional<double> tv_estimate;
  bool tv_out_of_range = false;
  std::size_t samples = 0;
  double wall_time_s = 0.0;
  double wall_time_per_ess = 0.0;  // seconds per effective sample, worst function

  const FunctionDiagnostics& worst() const;
};

/// Diagnostics for one chain. Throws UsageError for an empty trace.
DiagnosticsSummary summarize(const Trace& trace, const SummaryConfig& config = {});

/// Pools several chains: ESS adds across chains, tau = total samples / ESS,
/// moments and TV use the pooled samples.
DiagnosticsSummary summarize_chains(const std::vector<Trace>& traces, const SummaryConfig& config = {});

}  // namespace geomala
