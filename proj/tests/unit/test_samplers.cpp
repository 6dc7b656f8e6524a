#include <doctest.h>

#include <cmath>
#include <numbers>

#include "geomala/error.hpp"
#include "geomala/samplers.hpp"
#include "helpers.hpp"

using namespace geomala;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

std::vector<ProposalKernel> all_kernels(double lambda, const MatrixXd& sigma, const MetricField& metric) {
  return {ProposalKernel::rwm(lambda, sigma),
          ProposalKernel::mala(lambda),
          ProposalKernel::precond_mala(lambda, sigma),
          ProposalKernel::simplified_mmala(lambda, metric),
          ProposalKernel::mmala(lambda, metric),
          ProposalKernel::manifold_rwm(lambda, metric)};
}

bool same_trace(const Trace& a, const Trace& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.states[i] != b.states[i] || a.log_pis[i] != b.log_pis[i] || a.accepted[i] != b.accepted[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("MALA proposal mean and density on the standard Gaussian") {
  const StdGaussian t(1);
  const ProposalKernel k = ProposalKernel::mala(1.0);
  const ChainState s = prepare_state(t, k, scalar(2.0));
  REQUIRE(s.valid);
  CHECK(s.mean[0] == 1.0);
  CHECK(log_q(k, s, scalar(1.0)) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("SimplifiedMMALA with AbsEig on the quartic target") {
  const QuarticProduct t(1);
  const ChainState s = prepare_state(t, ProposalKernel::simplified_mmala(1.0, MetricField::abs_eig()), scalar(3.0));
  CHECK(s.mean[0] == doctest::Approx(2.5));
}

TEST_CASE("symmetric proposals") {
  std::mt19937_64 rng(1);
  const StdGaussian t(3);
  const MatrixXd sigma = testing::random_spd(rng, 3);
  const ProposalKernel rwm = ProposalKernel::rwm(0.8, sigma);
  const ProposalKernel mrwm = ProposalKernel::manifold_rwm(0.8, MetricField::constant_matrix(sigma));
  for (int k = 0; k < 20; ++k) {
    const VectorXd x = testing::random_point(rng, 3), y = testing::random_point(rng, 3);
    for (const auto& kernel : {rwm, mrwm}) {
      const ChainState sx = prepare_state(t, kernel, x), sy = prepare_state(t, kernel, y);
      CHECK(std::abs(log_q(kernel, sx, y) - log_q(kernel, sy, x)) < 1e-12);
    }
  }
}

TEST_CASE("RWM acceptance probability is the density ratio") {
  const StdGaussian t(1);
  const ProposalKernel k = ProposalKernel::rwm(1.0);
  CHECK(log_alpha(k, prepare_state(t, k, scalar(0.0)), prepare_state(t, k, scalar(1.0))) == doctest::Approx(-0.5));
  CHECK(log_alpha(k, prepare_state(t, k, scalar(1.0)), prepare_state(t, k, scalar(0.0))) == 0.0);
}

TEST_CASE("detailed balance in log form for every kernel") {
  std::mt19937_64 rng(77);
  const std::vector<std::pair<TargetPtr, MetricField>> cases = {
      {std::make_shared<StdGaussian>(3), MetricField::fisher()},
      {std::make_shared<QuarticProduct>(2), MetricField::soft_abs(10.0)},
      {std::make_shared<QuarticProduct>(2), MetricField::abs_eig()},
      {std::make_shared<CauchyProduct>(2), MetricField::nearest_pd()},
      {std::make_shared<BayesLogistic>(BayesLogistic::synthetic(20, 3, 100.0, 3)), MetricField::fisher()},
  };
  for (const auto& [target, metric] : cases) {
    const auto n = target->dim();
    const MatrixXd sigma = testing::random_spd(rng, n);
    for (const auto& kernel : all_kernels(0.7, sigma, metric)) {
      CAPTURE(kernel.describe());
      for (int k = 0; k < 50; ++k) {
        const VectorXd x = testing::random_point(rng, n), y = testing::random_point(rng, n);
        const ChainState sx = prepare_state(*target, kernel, x), sy = prepare_state(*target, kernel, y);
        REQUIRE(sx.valid);
        REQUIRE(sy.valid);
        const double lhs = sx.log_pi + log_q(kernel, sx, y) + log_alpha(kernel, sx, sy);
        const double rhs = sy.log_pi + log_q(kernel, sy, x) + log_alpha(kernel, sy, sx);
        REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      }
    }
  }
}

TEST_CASE("reduction lattice gives identical traces") {
  const StdGaussian t(3);
  RunOptions o;
  o.steps = 3000;
  o.burn_in = 100;
  o.seed = 9;
  const VectorXd x0 = VectorXd::Constant(3, 1.5);
  const Trace mala = run_chain(t, ProposalKernel::mala(0.9), x0, o);
  CHECK(same_trace(mala, run_chain(t, ProposalKernel::mmala(0.9, MetricField::identity()), x0, o)));
  CHECK(same_trace(mala, run_chain(t, ProposalKernel::simplified_mmala(0.9, MetricField::identity()), x0, o)));
  CHECK(same_trace(mala, run_chain(t, ProposalKernel::precond_mala(0.9, MatrixXd::Identity(3, 3)), x0, o)));
  const Trace rwm = run_chain(t, ProposalKernel::rwm(0.9), x0, o);
  CHECK(same_trace(rwm, run_chain(t, ProposalKernel::manifold_rwm(0.9, MetricField::identity()), x0, o)));
  CHECK(same_trace(rwm, run_chain(t, ProposalKernel::rwm(0.9, MatrixXd::Identity(3, 3)), x0, o)));
}

TEST_CASE("rejected steps repeat the previous state") {
  const QuarticProduct t(2);
  RunOptions o;
  o.steps = 2000;
  o.seed = 4;
  const Trace tr = run_chain(t, ProposalKernel::mala(1.2), VectorXd::Constant(2, 0.5), o);
  std::size_t rejects = 0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (!tr.accepted[i]) {
      ++rejects;
      REQUIRE(tr.states[i] == tr.states[i - 1]);
      REQUIRE(tr.log_pis[i] == tr.log_pis[i - 1]);
    }
  }
  CHECK(rejects > 0);
}

TEST_CASE("run_chain is deterministic and honours burn-in and thinning") {
  const CauchyProduct t(2);
  RunOptions o;
  o.steps = 1000;
  o.burn_in = 100;
  o.thin = 3;
  o.seed = 21;
  const Trace a = run_chain(t, ProposalKernel::rwm(1.0), VectorXd::Zero(2), o);
  const Trace b = run_chain(t, ProposalKernel::rwm(1.0), VectorXd::Zero(2), o);
  CHECK(same_trace(a, b));
  CHECK(a.size() == 300);
  CHECK(a.iterations.front() == 103);
  CHECK(a.iterations.back() == 1000);
  o.seed = 22;
  CHECK_FALSE(same_trace(a, run_chain(t, ProposalKernel::rwm(1.0), VectorXd::Zero(2), o)));
}

TEST_CASE("tiny RWM steps are always accepted") {
  const StdGaussian t(2);
  RunOptions o;
  o.steps = 500;
  const Trace tr = run_chain(t, ProposalKernel::rwm(1e-9), VectorXd::Constant(2, 0.3), o);
  CHECK(tr.acceptance_rate() == 1.0);
  CHECK((tr.states.back() - VectorXd::Constant(2, 0.3)).norm() < 1e-6);
}

TEST_CASE("run_chain argument errors") {
  const FunctionTarget half_line(1, "half-line", [](const VectorXd& x) {
    return x[0] > 0 ? -x[0] : -std::numeric_limits<double>::infinity();
  });
  RunOptions o;
  o.steps = 10;
  CHECK_THROWS_AS(run_chain(half_line, ProposalKernel::rwm(1.0), scalar(-1.0), o), UsageError);
  o.burn_in = 10;
  CHECK_THROWS_AS(run_chain(half_line, ProposalKernel::rwm(1.0), scalar(1.0), o), UsageError);
  o.burn_in = 0;
  o.thin = 0;
  CHECK_THROWS_AS(run_chain(half_line, ProposalKernel::rwm(1.0), scalar(1.0), o), UsageError);
  CHECK_THROWS_AS(ProposalKernel::rwm(0.0), UsageError);
  CHECK_THROWS_AS(ProposalKernel::rwm(1.0, -MatrixXd::Identity(2, 2)), UsageError);
}

TEST_CASE("zero-density proposals are rejected on a truncated target") {
  const FunctionTarget half_line(1, "half-line", [](const VectorXd& x) {
    return x[0] > 0 ? -x[0] : -std::numeric_limits<double>::infinity();
  }, [](const VectorXd&) -> VectorXd { return VectorXd::Constant(1, -1.0); });
  RunOptions o;
  o.steps = 5000;
  const Trace tr = run_chain(half_line, ProposalKernel::rwm(2.0), scalar(1.0), o);
  for (const auto& s : tr.states) REQUIRE(s[0] > 0.0);
}

TEST_CASE("acceptance decreases with the step scale") {
  const StdGaussian t(10);
  const std::vector<double> grid = {0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  auto wilson = [](double p, double m) {
    const double z = 1.96, d = 1 + z * z / m, c = (p + z * z / (2 * m)) / d;
    const double r = z * std::sqrt(p * (1 - p) / m + z * z / (4 * m * m)) / d;
    return std::pair{c - r, c + r};
  };
  RunOptions o;
  o.steps = 20000;
  o.seed = 5;
  for (const auto& base : {ProposalKernel::rwm(1.0), ProposalKernel::mala(1.0)}) {
    double prev_hi = 1.0;
    for (double l : grid) {
      const double a = run_chain(t, base.with_lambda(l), VectorXd::Zero(10), o).acceptance_rate();
      const auto [lo, hi] = wilson(a, static_cast<double>(o.steps));
      CHECK(lo <= prev_hi);
      prev_hi = hi;
    }
  }
}

TEST_CASE("parallel chains match sequential chains") {
  const StdGaussian t(2);
  RunOptions o;
  o.steps = 1000;
  o.seed = 8;
  const auto x0 = [](std::uint64_t c) { return VectorXd::Constant(2, static_cast<double>(c)); };
  const auto outcomes = run_chains(t, ProposalKernel::mala(1.0), x0, o, 5, 3);
  REQUIRE(outcomes.size() == 5);
  for (std::uint64_t c = 0; c < 5; ++c) {
    REQUIRE(outcomes[c].trace);
    RunOptions oc = o;
    oc.chain = c;
    CHECK(same_trace(*outcomes[c].trace, run_chain(t, ProposalKernel::mala(1.0), x0(c), oc)));
  }
}

TEST_CASE("a failing chain does not stop the others") {
  const FunctionTarget half_line(1, "half-line", [](const VectorXd& x) {
    return x[0] > 0 ? -x[0] : -std::numeric_limits<double>::infinity();
  });
  RunOptions o;
  o.steps = 100;
  const auto outcomes =
      run_chains(half_line, ProposalKernel::rwm(1.0), [](std::uint64_t c) { return scalar(c == 1 ? -1.0 : 1.0); }, o, 3, 2);
  CHECK(outcomes[0].trace);
  CHECK_FALSE(outcomes[1].trace);
  CHECK_FALSE(outcomes[1].error.empty());
  CHECK(outcomes[2].trace);
}

TEST_CASE("kernel names round-trip") {
  for (auto k : {KernelKind::RWM, KernelKind::MALA, KernelKind::PrecondMALA, KernelKind::SimplifiedMMALA,
                 KernelKind::MMALA, KernelKind::ManifoldRWM}) {
    CHECK(parse_kernel_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_kernel_kind("HMC"), UsageError);
}
