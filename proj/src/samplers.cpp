#include "geomala/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "geomala/error.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::RWM: return "RWM";
    case KernelKind::MALA: return "MALA";
    case KernelKind::PrecondMALA: return "PrecondMALA";
    case KernelKind::SimplifiedMMALA: return "SimplifiedMMALA";
    case KernelKind::MMALA: return "MMALA";
    case KernelKind::ManifoldRWM: return "ManifoldRWM";
  }
  return "?";
}

KernelKind parse_kernel_kind(const std::string& name) {
  for (auto k : {KernelKind::RWM, KernelKind::MALA, KernelKind::PrecondMALA, KernelKind::SimplifiedMMALA,
                 KernelKind::MMALA, KernelKind::ManifoldRWM}) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown kernel kind '" + name + "'");
}

ProposalKernel::ProposalKernel(KernelKind kind, double lambda, MatrixXd sigma, MetricField metric)
    : kind_(kind), lambda_(lambda), sigma_(std::move(sigma)), metric_(std::move(metric)) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw UsageError(fmt::format("kernel: step scale lambda must be positive, got {}", lambda));
  }
  if (sigma_.size() > 0) {
    if (sigma_.rows() != sigma_.cols()) throw UsageError("kernel: Sigma must be square");
    Eigen::LLT<MatrixXd> llt(0.5 * (sigma_ + sigma_.transpose()));
    if (llt.info() != Eigen::Success) throw UsageError("kernel: Sigma must be symmetric positive definite");
    sigma_chol_ = llt.matrixL().toDenseMatrix();
  }
}

ProposalKernel ProposalKernel::rwm(double lambda, MatrixXd sigma) {
  return {KernelKind::RWM, lambda, std::move(sigma)};
}
ProposalKernel ProposalKernel::mala(double lambda) { return {KernelKind::MALA, lambda}; }
ProposalKernel ProposalKernel::precond_mala(double lambda, MatrixXd sigma) {
  return {KernelKind::PrecondMALA, lambda, std::move(sigma)};
}
ProposalKernel ProposalKernel::simplified_mmala(double lambda, MetricField metric) {
  return {KernelKind::SimplifiedMMALA, lambda, {}, std::move(metric)};
}
ProposalKernel ProposalKernel::mmala(double lambda, MetricField metric) {
  return {KernelKind::MMALA, lambda, {}, std::move(metric)};
}
ProposalKernel ProposalKernel::manifold_rwm(double lambda, MetricField metric) {
  return {KernelKind::ManifoldRWM, lambda, {}, std::move(metric)};
}

MatrixXd ProposalKernel::sigma_factor(Index n) const {
  if (sigma_chol_.size() == 0) return MatrixXd::Identity(n, n);
  if (sigma_chol_.rows() != n) {
    throw UsageError(fmt::format("kernel: Sigma is {0}x{0} but target has dimension {1}", sigma_chol_.rows(), n));
  }
  return sigma_chol_;
}

bool ProposalKernel::needs_gradient() const {
  return kind_ == KernelKind::MALA || kind_ == KernelKind::PrecondMALA ||
         kind_ == KernelKind::SimplifiedMMALA || kind_ == KernelKind::MMALA;
}

bool ProposalKernel::needs_metric() const {
  return kind_ == KernelKind::SimplifiedMMALA || kind_ == KernelKind::MMALA ||
         kind_ == KernelKind::ManifoldRWM;
}

bool ProposalKernel::needs_metric_derivatives() const {
  return kind_ == KernelKind::MMALA || kind_ == KernelKind::ManifoldRWM;
}

ProposalKernel ProposalKernel::with_lambda(double lambda) const {
  ProposalKernel k = *this;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw UsageError(fmt::format("kernel: step scale lambda must be positive, got {}", lambda));
  }
  k.lambda_ = lambda;
  return k;
}

std::string ProposalKernel::describe() const {
  if (needs_metric()) return fmt::format("{}(lambda={},{})", to_string(kind_), lambda_, metric_.describe());
  if (sigma_.size() > 0) return fmt::format("{}(lambda={},Sigma)", to_string(kind_), lambda_);
  return fmt::format("{}(lambda={})", to_string(kind_), lambda_);
}

ChainState prepare_state(const TargetModel& target, const ProposalKernel& kernel, const VectorXd& x) {
  ChainState s;
  s.x = x;
  s.log_pi = target.log_density(x);
  if (!(s.log_pi > kNegInf) || std::isnan(s.log_pi)) return s;

  const Index n = x.size();
  const double l2 = kernel.lambda() * kernel.lambda();
  if (kernel.needs_gradient()) s.grad = target.grad_log_density(x);

  try {
    switch (kernel.kind()) {
      case KernelKind::RWM:
        s.mean = x;
        s.factor = kernel.sigma_factor(n);
        break;
      case KernelKind::MALA:
        s.mean = x + (0.5 * l2) * s.grad;
        s.factor = MatrixXd::Identity(n, n);
        break;
      case KernelKind::PrecondMALA:
        s.mean = x + (0.5 * l2) * (kernel.sigma().size() > 0 ? VectorXd(kernel.sigma() * s.grad) : s.grad);
        s.factor = kernel.sigma_factor(n);
        break;
      case KernelKind::SimplifiedMMALA:
      case KernelKind::MMALA:
      case KernelKind::ManifoldRWM: {
        const bool derivs = kernel.needs_metric_derivatives() && !kernel.metric().is_constant();
        s.metric = eval_metric(kernel.metric(), target, x, derivs);
        s.factor = s.metric->chol_G_inv;
        if (kernel.kind() == KernelKind::ManifoldRWM) {
          s.mean = derivs ? VectorXd(x + l2 * omega_from(*s.metric)) : x;
        } else {
          s.mean = x + (0.5 * l2) * natural_gradient(*s.metric, s.grad);
          if (derivs) s.mean += l2 * lambda_from(*s.metric);
        }
        break;
      }
    }
  } catch (const NumericError&) {
    return s;
  }
  s.log_det_factor = s.factor.diagonal().array().log().sum();
  s.valid = s.mean.allFinite() && s.factor.allFinite() && std::isfinite(s.log_det_factor);
  return s;
}

namespace {

double gaussian_log_norm(Index n, double lambda, double log_det_factor) {
  return -0.5 * static_cast<double>(n) * kLog2Pi - static_cast<double>(n) * std::log(lambda) - log_det_factor;
}

}  // namespace

Proposal propose(const ProposalKernel& kernel, const ChainState& state, RandomStream& rng) {
  const Index n = state.x.size();
  const VectorXd z = rng.normal_vector(n);
  Proposal p;
  if (!state.valid) {
    p.x = state.x;
    p.log_q_fwd = kNegInf;
    return p;
  }
  const VectorXd noise = state.factor.triangularView<Eigen::Lower>() * z;
  p.x = state.mean + kernel.lambda() * noise;
  p.log_q_fwd = gaussian_log_norm(n, kernel.lambda(), state.log_det_factor) - 0.5 * z.squaredNorm();
  p.valid = p.x.allFinite();
  return p;
}

double log_q(const ProposalKernel& kernel, const ChainState& from, const VectorXd& to) {
  if (!from.valid) return kNegInf;
  const VectorXd r = (to - from.mean) / kernel.lambda();
  const VectorXd y = from.factor.triangularView<Eigen::Lower>().solve(r);
  return gaussian_log_norm(to.size(), kernel.lambda(), from.log_det_factor) - 0.5 * y.squaredNorm();
}

double log_alpha(const ProposalKernel& kernel, const ChainState& from, const ChainState& to) {
  if (!from.valid || !to.valid) return kNegInf;
  const double ratio = to.log_pi + log_q(kernel, to, from.x) - from.log_pi - log_q(kernel, from, to.x);
  if (std::isnan(ratio)) return kNegInf;
  return std::min(0.0, ratio);
}

StepResult mh_step(const TargetModel& target, const ProposalKernel& kernel, const ChainState& state,
                   RandomStream& rng) {
  Proposal prop = propose(kernel, state, rng);
  const double u = rng.uniform();
  StepResult out;
  out.log_q_fwd = prop.log_q_fwd;
  out.proposal_valid = prop.valid;
  out.log_alpha = kNegInf;
  out.log_q_rev = kNegInf;
  if (prop.valid) {
    ChainState cand = prepare_state(target, kernel, prop.x);
    if (cand.valid) {
      out.log_q_rev = log_q(kernel, cand, state.x);
      const double ratio = cand.log_pi + out.log_q_rev - state.log_pi - out.log_q_fwd;
      out.log_alpha = std::isnan(ratio) ? kNegInf : std::min(0.0, ratio);
      if (std::log(u) < out.log_alpha) {
        out.accepted = true;
        out.state = std::move(cand);
        return out;
      }
    } else if (std::isfinite(cand.log_pi)) {
      // reverse geometry blew up at a point of positive density
      out.proposal_valid = false;
    }
  }
  out.state = state;
  return out;
}

double Trace::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  std::size_t count = 0;
  for (char a : accepted) count += a ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(accepted.size());
}

MatrixXd Trace::matrix() const {
  MatrixXd m(static_cast<Index>(states.size()), dim());
  for (std::size_t i = 0; i < states.size(); ++i) m.row(static_cast<Index>(i)) = states[i].transpose();
  return m;
}

Trace run_chain(const TargetModel& target, const ProposalKernel& kernel, const VectorXd& x0,
                const RunOptions& options) {
  if (options.steps <= options.burn_in || options.burn_in < 0) {
    throw UsageError(fmt::format("run_chain: need steps > burn_in >= 0 (steps={}, burn_in={})",
                                 options.steps, options.burn_in));
  }
  if (options.thin < 1) throw UsageError("run_chain: thin must be a positive integer");
  if (x0.size() != target.dim()) {
    throw UsageError(fmt::format("run_chain: x0 has dimension {}, target {}", x0.size(), target.dim()));
  }

  RandomStream rng(options.seed, options.chain);
  ChainState state = prepare_state(target, kernel, x0);
  if (!(state.log_pi > kNegInf) || std::isnan(state.log_pi)) {
    throw UsageError("run_chain: starting point has zero target density");
  }

  Trace trace;
  trace.seed = options.seed;
  trace.chain = options.chain;
  trace.kernel = kernel.describe();
  trace.metric = kernel.needs_metric() ? kernel.metric().describe() : "none";
  const auto records = static_cast<std::size_t>((options.steps - options.burn_in) / options.thin);
  trace.iterations.reserve(records);
  trace.states.reserve(records);
  trace.log_pis.reserve(records);
  trace.accepted.reserve(records);
  trace.proposal_logqs.reserve(records);

  const auto start = std::chrono::steady_clock::now();
  for (long it = 1; it <= options.steps; ++it) {
    StepResult step = mh_step(target, kernel, state, rng);
    if (!step.proposal_valid) ++trace.invalid_proposals;
    state = std::move(step.state);
    if (it > options.burn_in && (it - options.burn_in) % options.thin == 0) {
      trace.iterations.push_back(it);
      trace.states.push_back(state.x);
      trace.log_pis.push_back(state.log_pi);
      trace.accepted.push_back(step.accepted ? 1 : 0);
      trace.proposal_logqs.emplace_back(step.log_q_fwd, step.log_q_rev);
    }
  }
  trace.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  trace.wall_time_per_1000 = trace.wall_time_s * 1000.0 / static_cast<double>(options.steps);
  return trace;
}

std::vector<ChainOutcome> run_chains(const TargetModel& target, const ProposalKernel& kernel,
                                     const std::function<VectorXd(std::uint64_t)>& x0_for,
                                     RunOptions options, int chains, int threads) {
  std::vector<ChainOutcome> out(static_cast<std::size_t>(std::max(chains, 0)));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int c = next++; c < chains; c = next++) {
      RunOptions opt = options;
      opt.chain = static_cast<std::uint64_t>(c);
      try {
        out[static_cast<std::size_t>(c)].trace = run_chain(target, kernel, x0_for(opt.chain), opt);
      } catch (const std::exception& e) {
        out[static_cast<std::size_t>(c)].error = e.what();
      }
    }
  };
  const int pool = std::clamp(threads, 1, std::max(chains, 1));
  {
    std::vector<std::jthread> workers;
    workers.reserve(static_cast<std::size_t>(pool));
    for (int t = 0; t < pool; ++t) workers.emplace_back(worker);
  }
  return out;
}

}  // namespace geomala
