#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geomala/metrics.hpp"
#include "geomala/random.hpp"
#include "geomala/targets.hpp"

namespace geomala {

enum class KernelKind { RWM, MALA, PrecondMALA, SimplifiedMMALA, MMALA, ManifoldRWM };

KernelKind parse_kernel_kind(const std::string& name);
std::string to_string(KernelKind kind);

/// Gaussian proposal Q(x, .) = N(mean(x), lambda^2 C(x)).
///
///   RWM              mean x                                 C = Sigma
///   MALA             x + l^2/2 grad                         C = I
///   PrecondMALA      x + l^2/2 Sigma grad                   C = Sigma
///   SimplifiedMMALA  x + l^2/2 G^-1 grad                    C = G^-1
///   MMALA            x + l^2/2 G^-1 grad + l^2 Lambda       C = G^-1
///   ManifoldRWM      x + l^2 Omega                          C = G^-1
class ProposalKernel {
 public:
  ProposalKernel(KernelKind kind, double lambda, Eigen::MatrixXd sigma = {},
                 MetricField metric = MetricField::identity());

  static ProposalKernel rwm(double lambda, Eigen::MatrixXd sigma = {});
  static ProposalKernel mala(double lambda);
  static ProposalKernel precond_mala(double lambda, Eigen::MatrixXd sigma);
  static ProposalKernel simplified_mmala(double lambda, MetricField metric);
  static ProposalKernel mmala(double lambda, MetricField metric);
  static ProposalKernel manifold_rwm(double lambda, MetricField metric);

  KernelKind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  const MetricField& metric() const { return metric_; }
  /// Lower Cholesky factor of Sigma, or identity of size n when none was given.
  Eigen::MatrixXd sigma_factor(Eigen::Index n) const;
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  bool needs_gradient() const;
  bool needs_metric() const;
  bool needs_metric_derivatives() const;

  ProposalKernel with_lambda(double lambda) const;
  std::string describe() const;

 private:
  KernelKind kind_;
  double lambda_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd sigma_chol_;
  MetricField metric_;
};

/// A chain position together with everything the kernel needs at it. The
/// proposal mean and the unit covariance factor are cached so the reverse
/// density of an accepted move is never recomputed.
struct ChainState {
  Eigen::VectorXd x;
  double log_pi = 0.0;
  Eigen::VectorXd grad;               // empty unless the kernel uses gradients
  std::optional<MetricEval> metric;   // set for manifold kernels
  Eigen::VectorXd mean;               // proposal mean from this state
  Eigen::MatrixXd factor;             // L with L L^T = C(x)
  double log_det_factor = 0.0;        // sum log diag(L)
  bool valid = false;                 // false: non-finite drift or geometry, auto-reject
};

ChainState prepare_state(const TargetModel& target, const ProposalKernel& kernel, const Eigen::VectorXd& x);

struct Proposal {
  Eigen::VectorXd x;
  double log_q_fwd = 0.0;
  bool valid = false;
};

Proposal propose(const ProposalKernel& kernel, const ChainState& state, RandomStream& rng);

/// log density of `to` under Q(from.x, .).
double log_q(const ProposalKernel& kernel, const ChainState& from, const Eigen::VectorXd& to);

/// min(0, log pi(to) + log q(from|to) - log pi(from) - log q(to|from)),
/// -inf if either state is unusable.
double log_alpha(const ProposalKernel& kernel, const ChainState& from, const ChainState& to);

struct StepResult {
  ChainState state;
  bool accepted = false;
  double log_alpha = 0.0;
  double log_q_fwd = 0.0;
  double log_q_rev = 0.0;
  bool proposal_valid = false;
};

/// One Metropolis-Hastings iteration. Consumes exactly n normals and one
/// uniform from `rng` regardless of the outcome.
StepResult mh_step(const TargetModel& target, const ProposalKernel& kernel, const ChainState& state,
                   RandomStream& rng);

struct RunOptions {
  long steps = 10000;
  long burn_in = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
};

struct Trace {
  std::vector<long> iterations;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> log_pis;
  std::vector<char> accepted;
  std::vector<std::pair<double, double>> proposal_logqs;  // (forward, reverse)
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  std::string kernel;
  std::string metric;
  long invalid_proposals = 0;
  double wall_time_s = 0.0;
  double wall_time_per_1000 = 0.0;

  std::size_t size() const { return states.size(); }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }
  double acceptance_rate() const;
  /// Recorded states as a (records x dim) matrix.
  Eigen::MatrixXd matrix() const;
};

/// Runs `steps` iterations and records every `thin`-th state after
/// `burn_in`, i.e. (steps - burn_in) / thin records.
Trace run_chain(const TargetModel& target, const ProposalKernel& kernel, const Eigen::VectorXd& x0,
                const RunOptions& options);

struct ChainOutcome {
  std::optional<Trace> trace;
  std::string error;  // empty on success
};

/// Runs chains 0..chains-1 on a pool of at most `threads` workers; chain c
/// uses stream (seed, c) and starts at x0_for(c). A failing chain does not
/// stop the others.
std::vector<ChainOutcome> run_chains(const TargetModel& target, const ProposalKernel& kernel,
                              const std::function<Eigen::VectorXd(std::uint64_t)>& x0_for,
                              RunOptions options, int chains, int threads);

}  // namespace geomala
