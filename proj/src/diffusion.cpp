#include "geomala/diffusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "geomala/error.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

DiffusionSpec DiffusionSpec::langevin(TargetPtr target) {
  DiffusionSpec s;
  s.name = "Langevin(" + target->name() + ")";
  s.drift = [target](const VectorXd& x) -> VectorXd { return 0.5 * target->grad_log_density(x); };
  const Index n = target->dim();
  s.volatility = [n](const VectorXd&) -> MatrixXd { return MatrixXd::Identity(n, n); };
  s.diffusion_matrix = s.volatility;
  return s;
}

DiffusionSpec DiffusionSpec::manifold_langevin(TargetPtr target, MetricField metric) {
  DiffusionSpec s;
  s.name = "ManifoldLangevin(" + target->name() + "," + metric.describe() + ")";
  s.drift = [target, metric](const VectorXd& x) -> VectorXd {
    const MetricEval e = eval_metric(metric, *target, x, !metric.is_constant());
    VectorXd b = 0.5 * natural_gradient(e, target->grad_log_density(x));
    if (e.dG_inv) b += lambda_from(e);
    return b;
  };
  s.volatility = [target, metric](const VectorXd& x) -> MatrixXd {
    return eval_metric(metric, *target, x, false).chol_G_inv;
  };
  s.diffusion_matrix = [target, metric](const VectorXd& x) -> MatrixXd {
    return eval_metric(metric, *target, x, false).G_inv;
  };
  return s;
}

DiffusionSpec DiffusionSpec::manifold_brownian(TargetPtr target, MetricField metric) {
  DiffusionSpec s;
  s.name = "ManifoldBrownian(" + metric.describe() + ")";
  const Index n = target->dim();
  s.drift = [target, metric, n](const VectorXd& x) -> VectorXd {
    if (metric.is_constant()) return VectorXd::Zero(n);
    return omega_from(eval_metric(metric, *target, x, true));
  };
  s.volatility = [target, metric](const VectorXd& x) -> MatrixXd {
    return eval_metric(metric, *target, x, false).chol_G_inv;
  };
  s.diffusion_matrix = [target, metric](const VectorXd& x) -> MatrixXd {
    return eval_metric(metric, *target, x, false).G_inv;
  };
  return s;
}

DiffusionSpec DiffusionSpec::custom(fd::VectorField drift, fd::MatrixField volatility, std::string name) {
  DiffusionSpec s;
  s.name = std::move(name);
  s.drift = std::move(drift);
  s.volatility = std::move(volatility);
  s.diffusion_matrix = [vol = s.volatility](const VectorXd& x) -> MatrixXd {
    const MatrixXd sig = vol(x);
    return sig * sig.transpose();
  };
  return s;
}

VectorXd em_step(const DiffusionSpec& spec, const VectorXd& x, double dt, const VectorXd& z) {
  if (!(dt > 0.0)) throw UsageError(fmt::format("em_step: dt must be positive, got {}", dt));
  VectorXd next = x + spec.drift(x) * dt + spec.volatility(x) * (std::sqrt(dt) * z);
  if (!next.allFinite()) throw IntegrationError("em_step: non-finite state", x, dt);
  return next;
}

VectorXd em_step(const DiffusionSpec& spec, const VectorXd& x, double dt, RandomStream& rng) {
  return em_step(spec, x, dt, rng.normal_vector(x.size()));
}

std::vector<VectorXd> simulate_path(const DiffusionSpec& spec, const VectorXd& x0, double dt, long steps,
                                    RandomStream& rng) {
  if (steps < 0) throw UsageError("simulate_path: steps must be non-negative");
  std::vector<VectorXd> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  path.push_back(x0);
  for (long s = 0; s < steps; ++s) {
    try {
      path.push_back(em_step(spec, path.back(), dt, rng));
    } catch (const IntegrationError& e) {
      throw IntegrationError(fmt::format("simulate_path: non-finite state at step {}", s + 1), e.point(), dt, s + 1);
    }
  }
  return path;
}

double generator_apply(const DiffusionSpec& spec, const fd::ScalarField& f, const VectorXd& x, double h) {
  const Index n = x.size();
  VectorXd grad(n);
  VectorXd y = x;
  for (Index i = 0; i < n; ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  const MatrixXd hess = fd::hessian(f, x, h);
  const MatrixXd v = spec.diffusion_matrix(x);
  return spec.drift(x).dot(grad) + 0.5 * v.cwiseProduct(hess).sum();
}

double laplace_beltrami(const fd::ScalarField& f, const fd::MatrixField& metric, const VectorXd& x, double h) {
  auto natural_grad = [&](const VectorXd& y) -> VectorXd {
    Eigen::LLT<MatrixXd> llt(metric(y));
    if (llt.info() != Eigen::Success) throw NumericError("laplace_beltrami: metric not SPD", y);
    return llt.solve(fd::gradient(f, y, h));
  };
  return divergence_local(natural_grad, x, metric, h);
}

double fokker_planck_residual(const TargetModel& target, const DiffusionSpec& spec, const VectorXd& x, double h) {
  const Index n = x.size();
  const double log_pi0 = target.log_density(x);
  auto ratio = [&](const VectorXd& y) { return std::exp(target.log_density(y) - log_pi0); };

  // Fourth-order central stencils: offsets -2h..2h.
  static constexpr double kFirst[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  static constexpr double kSecond[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

  double lhs = 0.0;
  double rhs = 0.0;
  VectorXd y = x;
  for (Index i = 0; i < n; ++i) {
    for (int a = 0; a < 5; ++a) {
      y[i] = x[i] + (a - 2) * h;
      const double r = ratio(y);
      // d_i(b_i pi) and d_i^2(V_ii pi), both relative to pi(x)
      if (kFirst[a] != 0.0) lhs += kFirst[a] * spec.drift(y)[i] * r / h;
      rhs += 0.5 * kSecond[a] * spec.diffusion_matrix(y)(i, i) * r / (h * h);
    }
    y[i] = x[i];
    for (Index j = i + 1; j < n; ++j) {
      double mixed = 0.0;
      for (int a = 0; a < 5; ++a) {
        if (kFirst[a] == 0.0) continue;
        for (int b = 0; b < 5; ++b) {
          if (kFirst[b] == 0.0) continue;
          y[i] = x[i] + (a - 2) * h;
          y[j] = x[j] + (b - 2) * h;
          mixed += kFirst[a] * kFirst[b] * spec.diffusion_matrix(y)(i, j) * ratio(y);
        }
      }
      y[i] = x[i];
      y[j] = x[j];
      // (i, j) and (j, i) contribute equally
      rhs += mixed / (h * h);
    }
  }
  return std::abs(lhs - rhs);
}

}  // namespace geomala
