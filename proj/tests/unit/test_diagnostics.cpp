#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "geomala/diagnostics.hpp"
#include "geomala/error.hpp"

using namespace geomala;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> ar1(double phi, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(m);
  const double sd = std::sqrt(1 - phi * phi);
  x[0] = z(rng);
  for (std::size_t i = 1; i < m; ++i) x[i] = phi * x[i - 1] + sd * z(rng);
  return x;
}

// Truncated geometric series: the value act_time targets for an AR(1) ACF.
double ar1_tau_oracle(double phi, double eps) {
  double tau = 1.0, rho = phi;
  while (std::abs(rho) >= eps) {
    tau += 2 * rho;
    rho *= phi;
  }
  return tau;
}

Trace make_trace(const std::vector<VectorXd>& states, const std::vector<char>& accepted) {
  Trace t;
  t.states = states;
  t.accepted = accepted;
  for (std::size_t i = 0; i < states.size(); ++i) {
    t.iterations.push_back(static_cast<long>(i + 1));
    t.log_pis.push_back(-0.5 * states[i].squaredNorm());
    t.proposal_logqs.emplace_back(0.0, 0.0);
  }
  return t;
}

}  // namespace

TEST_CASE("autocorrelation basics") {
  const std::vector<double> s = {0.3, 1.2, -0.7, 2.2, 0.1, -1.4};
  CHECK(autocorrelation(s, 0) == doctest::Approx(1.0));
  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  CHECK(autocorrelation(alt, 1) == doctest::Approx(-1.0).epsilon(0.01));
  const std::vector<double> flat(50, 3.0);
  CHECK(autocorrelation(flat, 3) == 0.0);
  CHECK_THROWS_AS(autocorrelation(s, 6), UsageError);
}

TEST_CASE("FFT autocorrelations agree with the direct sum") {
  const auto x = ar1(0.7, 5000, 3);
  const auto all = autocorrelations(x, 200);
  REQUIRE(all.size() == 201);
  for (long k : {0L, 1L, 7L, 64L, 65L, 150L, 200L}) CHECK(all[static_cast<std::size_t>(k)] == doctest::Approx(autocorrelation(x, k)).epsilon(1e-9));
}

TEST_CASE("AR(1) lag-1 autocorrelation") {
  const auto x = ar1(0.5, 1000000, 1);
  CHECK(std::abs(autocorrelation(x, 1) - 0.5) < 0.01);
}

TEST_CASE("tau of iid draws is near one across seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = ar1(0.0, 100000, seed);
    const ActResult r = act_time(x);
    CHECK(r.tau >= 0.8);
    CHECK(r.tau <= 1.2);
    CHECK_FALSE(r.warning);
  }
}

TEST_CASE("tau of AR(1) series matches the geometric oracle") {
  for (double phi : {0.3, 0.5, 0.8}) {
    CAPTURE(phi);
    const auto x = ar1(phi, 1000000, 17);
    const double tau = act_time(x).tau;
    CHECK(std::abs(tau - (1 + phi) / (1 - phi)) <= 0.1 * (1 + phi) / (1 - phi));
    CHECK(tau == doctest::Approx(ar1_tau_oracle(phi, 0.05)).epsilon(0.05));
  }
  CHECK(std::abs(act_time(ar1(0.5, 1000000, 5)).tau - 3.0) < 0.2);
}

TEST_CASE("truncation lag and warnings") {
  const ActResult flat = act_time(std::vector<double>(100, 1.0));
  CHECK(flat.tau == 0.1);
  CHECK(flat.warning);
  // |rho_k| = 1 - k/m never drops below epsilon before m/2
  std::vector<double> alt(2000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  CHECK(act_time(alt).warning);
  CHECK_THROWS_AS(act_time(std::vector<double>(9, 1.0)), UsageError);
  const ActResult r = act_time(ar1(0.5, 100000, 2));
  CHECK(r.p >= 3);
  CHECK(r.p <= 7);
}

TEST_CASE("ESS") {
  const auto iid = ar1(0.0, 100000, 4);
  CHECK(ess(iid).ess == doctest::Approx(100000.0).epsilon(0.2));
  const auto x = ar1(0.5, 300000, 6);
  const EssResult r = ess(x);
  CHECK(r.ess == doctest::Approx(1e5).epsilon(0.1));
  CHECK(r.ess * r.act.tau == doctest::Approx(300000.0).epsilon(1e-14));
}

TEST_CASE("empirical TV") {
  const StdGaussian g(1);
  const TvGrid grid;
  SUBCASE("exact draws from the binned target") {
    // inverse-CDF draws of the binned, renormalised target
    std::vector<double> w(50);
    const double width = (grid.hi - grid.lo) / grid.bins;
    for (int b = 0; b < 50; ++b) {
      const double mid = grid.lo + (b + 0.5) * width;
      w[static_cast<std::size_t>(b)] = std::exp(-0.5 * mid * mid);
    }
    std::mt19937_64 rng(1);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd s(1000000, 1);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, 0) = grid.lo + (pick(rng) + u(rng)) * width;
    const TvResult r = empirical_tv(s, g, grid);
    CHECK(r.tv < 0.01);
    CHECK_FALSE(r.out_of_range);
  }
  SUBCASE("disjoint support") {
    const Gaussian left(VectorXd::Constant(1, -2.5), MatrixXd::Constant(1, 1, 0.04));
    MatrixXd s = MatrixXd::Constant(1000, 1, 6.0);
    const TvResult r = empirical_tv(s, left, grid);
    CHECK(r.tv == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.out_of_range);
  }
  SUBCASE("permutation invariance and range") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.3, 1.2);
    MatrixXd s(2000, 2);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i) << z(rng), z(rng);
    const StdGaussian g2(2);
    const double tv = empirical_tv(s, g2, grid).tv;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(s.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd p(s.rows(), 2);
    for (Eigen::Index i = 0; i < s.rows(); ++i) p.row(i) = s.row(perm[static_cast<std::size_t>(i)]);
    CHECK(empirical_tv(p, g2, grid).tv == doctest::Approx(tv).epsilon(1e-12));
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
  }
  CHECK_THROWS_AS(empirical_tv(MatrixXd::Zero(5, 3), StdGaussian(3), grid), UsageError);
}

TEST_CASE("summaries") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  std::vector<VectorXd> states;
  for (int i = 0; i < 5000; ++i) states.push_back((VectorXd(2) << z(rng), z(rng)).finished());
  const Trace t = make_trace(states, std::vector<char>(states.size(), 1));
  const StdGaussian g(2);
  SummaryConfig cfg;
  cfg.tv_target = &g;
  const DiagnosticsSummary s = summarize(t, cfg);
  CHECK(s.acceptance_rate == 1.0);
  REQUIRE(s.functions.size() == 3);
  CHECK(s.functions[0].name == "x1");
  CHECK(s.functions[2].name == "norm2");
  for (const auto& f : s.functions) CHECK(f.ess * f.tau == doctest::Approx(5000.0).epsilon(1e-14));
  CHECK(s.tv_estimate);
  CHECK(*s.tv_estimate >= 0.0);
  CHECK(s.variance[0] == doctest::Approx(1.0).epsilon(0.1));

  const DiagnosticsSummary again = summarize(t, cfg);
  CHECK(again.functions[0].tau == s.functions[0].tau);
  CHECK(*again.tv_estimate == *s.tv_estimate);

  CHECK_THROWS_AS(summarize(Trace{}), UsageError);

  const DiagnosticsSummary pooled = summarize_chains({t, t});
  CHECK(pooled.functions[0].ess == doctest::Approx(2 * s.functions[0].ess));
  CHECK(pooled.samples == 10000);
}
