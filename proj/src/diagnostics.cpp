#include "geomala/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>
#include <fmt/format.h>

#include "geomala/error.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double mean_of(std::span<const double> s) {
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

// Biased autocovariance at lag k.
double autocov(std::span<const double> s, double mu, long k) {
  const auto m = static_cast<long>(s.size());
  double total = 0.0;
  for (long t = 0; t + k < m; ++t) total += (s[t] - mu) * (s[t + k] - mu);
  return total / static_cast<double>(m);
}

constexpr long kDirectLags = 64;

}  // namespace

double autocorrelation(std::span<const double> series, long lag) {
  if (lag < 0 || lag >= static_cast<long>(series.size())) {
    throw UsageError(fmt::format("autocorrelation: lag {} outside [0, {})", lag, series.size()));
  }
  if (lag == 0) return 1.0;
  const double mu = mean_of(series);
  const double c0 = autocov(series, mu, 0);
  if (c0 <= 0.0) return 0.0;
  return autocov(series, mu, lag) / c0;
}

std::vector<double> autocorrelations(std::span<const double> series, long max_lag) {
  const auto m = static_cast<long>(series.size());
  if (m == 0) throw UsageError("autocorrelations: empty series");
  max_lag = std::min(max_lag, m - 1);
  const double mu = mean_of(series);
  std::size_t len = 1;
  while (len < 2 * static_cast<std::size_t>(m)) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (long t = 0; t < m; ++t) padded[static_cast<std::size_t>(t)] = series[t] - mu;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  for (auto& c : spectrum) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> sums;
  fft.inv(sums, spectrum);
  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1, 0.0);
  rho[0] = 1.0;
  if (sums[0] <= 0.0) return rho;
  for (long k = 1; k <= max_lag; ++k) rho[static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)] / sums[0];
  return rho;
}

ActResult act_time(std::span<const double> series, double epsilon) {
  const auto m = static_cast<long>(series.size());
  if (m < 10) throw UsageError(fmt::format("act_time: need at least 10 samples, got {}", m));
  ActResult out;
  const double mu = mean_of(series);
  const double c0 = autocov(series, mu, 0);
  if (!(c0 > 0.0)) {
    out.tau = 0.1;
    out.p = 1;
    out.warning = true;
    return out;
  }
  const long limit = m / 2;
  std::vector<double> rho;  // filled by FFT once the direct loop runs long
  double sum = 0.0;
  for (long k = 1; k < limit; ++k) {
    double r;
    if (k <= kDirectLags) {
      r = autocov(series, mu, k) / c0;
    } else {
      if (rho.empty()) rho = autocorrelations(series, limit);
      r = rho[static_cast<std::size_t>(k)];
    }
    if (std::abs(r) < epsilon) {
      out.p = k;
      out.tau = std::max(0.1, 1.0 + 2.0 * sum);
      return out;
    }
    sum += r;
  }
  out.p = limit;
  out.warning = true;
  out.tau = std::max(0.1, 1.0 + 2.0 * sum);
  return out;
}

EssResult ess(std::span<const double> series, double epsilon) {
  EssResult out;
  out.act = act_time(series, epsilon);
  out.ess = static_cast<double>(series.size()) / out.act.tau;
  return out;
}

TvResult empirical_tv(const MatrixXd& samples, const TargetModel& target, const TvGrid& grid) {
  const Index dim = samples.cols();
  if (dim != target.dim()) throw UsageError("empirical_tv: sample dimension does not match target");
  if (dim < 1 || dim > 2) throw UsageError("empirical_tv: only 1-D and 2-D targets are supported");
  if (grid.bins < 1 || !(grid.hi > grid.lo)) throw UsageError("empirical_tv: invalid grid");
  if (samples.rows() == 0) throw UsageError("empirical_tv: no samples");

  const int bins = grid.bins;
  const double width = (grid.hi - grid.lo) / bins;
  const Index cells = dim == 1 ? bins : static_cast<Index>(bins) * bins;
  TvResult out;

  auto bin_of = [&](double v) {
    auto b = static_cast<long>(std::floor((v - grid.lo) / width));
    if (b < 0 || b >= bins || !std::isfinite(v)) {
      out.out_of_range = true;
      if (std::isnan(v)) return 0L;
      b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
      if (v >= grid.hi) b = bins - 1;
    }
    return b;
  };
  VectorXd counts = VectorXd::Zero(cells);
  for (Index r = 0; r < samples.rows(); ++r) {
    Index cell = bin_of(samples(r, 0));
    if (dim == 2) cell = cell * bins + bin_of(samples(r, 1));
    counts[cell] += 1.0;
  }
  counts /= static_cast<double>(samples.rows());

  // log-density at cell midpoints, shifted by the max before exponentiating
  VectorXd logp(cells);
  VectorXd mid(dim);
  for (Index c = 0; c < cells; ++c) {
    if (dim == 1) {
      mid[0] = grid.lo + (static_cast<double>(c) + 0.5) * width;
    } else {
      mid[0] = grid.lo + (static_cast<double>(c / bins) + 0.5) * width;
      mid[1] = grid.lo + (static_cast<double>(c % bins) + 0.5) * width;
    }
    logp[c] = target.log_density(mid);
  }
  const double top = logp.maxCoeff();
  if (!std::isfinite(top)) throw UsageError("empirical_tv: target has no mass on the grid");
  VectorXd mass = (logp.array() - top).exp();
  mass /= mass.sum();
  out.tv = std::clamp(0.5 * (counts - mass).cwiseAbs().sum(), 0.0, 1.0);
  return out;
}

const FunctionDiagnostics& DiagnosticsSummary::worst() const {
  if (functions.empty()) throw UsageError("summary has no test functions");
  return *std::min_element(functions.begin(), functions.end(),
                           [](const auto& a, const auto& b) { return a.ess < b.ess; });
}

namespace {

std::vector<std::vector<double>> test_function_series(const Trace& trace) {
  const Index n = trace.dim();
  std::vector<std::vector<double>> series(static_cast<std::size_t>(n) + 1);
  for (auto& s : series) s.reserve(trace.size());
  for (const auto& x : trace.states) {
    for (Index i = 0; i < n; ++i) series[static_cast<std::size_t>(i)].push_back(x[i]);
    series.back().push_back(x.squaredNorm());
  }
  return series;
}

std::vector<std::string> test_function_names(Index n) {
  std::vector<std::string> names;
  for (Index i = 0; i < n; ++i) names.push_back(fmt::format("x{}", i + 1));
  names.emplace_back("norm2");
  return names;
}

}  // namespace

DiagnosticsSummary summarize(const Trace& trace, const SummaryConfig& config) {
  return summarize_chains({trace}, config);
}

DiagnosticsSummary summarize_chains(const std::vector<Trace>& traces, const SummaryConfig& config) {
  if (traces.empty()) throw UsageError("summarize: no traces");
  const Index n = traces.front().dim();
  std::size_t total = 0;
  std::size_t accepted = 0;
  DiagnosticsSummary out;
  for (const auto& t : traces) {
    if (t.size() == 0) throw UsageError("summarize: trace has no recorded samples after burn-in");
    if (t.dim() != n) throw UsageError("summarize: traces differ in dimension");
    total += t.size();
    for (char a : t.accepted) accepted += a ? 1 : 0;
    out.wall_time_s += t.wall_time_s;
  }
  out.samples = total;
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);

  const auto names = test_function_names(n);
  out.functions.resize(names.size());
  for (std::size_t f = 0; f < names.size(); ++f) out.functions[f].name = names[f];
  for (const auto& t : traces) {
    const auto series = test_function_series(t);
    for (std::size_t f = 0; f < series.size(); ++f) {
      const EssResult r = ess(series[f], config.epsilon);
      auto& fn = out.functions[f];
      fn.ess += r.ess;
      fn.p = std::max(fn.p, r.act.p);
      fn.warning = fn.warning || r.act.warning;
      // a single chain keeps tau exactly; pooled chains use total / sum(ess)
      fn.tau = traces.size() == 1 ? r.act.tau : 0.0;
    }
  }
  for (auto& fn : out.functions) {
    if (traces.size() > 1) fn.tau = static_cast<double>(total) / fn.ess;
    out.n_lags_used = std::max(out.n_lags_used, fn.p);
  }

  MatrixXd pooled(static_cast<Index>(total), n);
  Index row = 0;
  for (const auto& t : traces)
    for (const auto& x : t.states) pooled.row(row++) = x.transpose();
  out.mean = pooled.colwise().mean().transpose();
  out.variance = (pooled.rowwise() - out.mean.transpose()).array().square().colwise().sum().transpose() /
                 static_cast<double>(std::max<Index>(pooled.rows() - 1, 1));

  if (config.tv_target && n <= 2) {
    const TvResult tv = empirical_tv(pooled, *config.tv_target, config.tv_grid);
    out.tv_estimate = tv.tv;
    out.tv_out_of_range = tv.out_of_range;
  }
  out.wall_time_per_ess = out.wall_time_s / out.worst().ess;
  return out;
}

}  // namespace geomala
