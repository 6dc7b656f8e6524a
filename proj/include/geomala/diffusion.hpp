#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geomala/finite_diff.hpp"
#include "geomala/metrics.hpp"
#include "geomala/random.hpp"
#include "geomala/targets.hpp"

namespace geomala {

/// Ito diffusion dX = b(X) dt + sigma(X) dB, with V = sigma sigma^T.
///
/// The named constructors own their target and metric, so a spec can
/// outlive the objects it was built from.
struct DiffusionSpec {
  std::string name;
  fd::VectorField drift;
  fd::MatrixField volatility;
  fd::MatrixField diffusion_matrix;

  /// b = grad log pi / 2, sigma = I.
  static DiffusionSpec langevin(TargetPtr target);
  /// b = G^-1 grad log pi / 2 + Lambda, sigma = chol(G^-1).
  static DiffusionSpec manifold_langevin(TargetPtr target, MetricField metric);
  /// Brownian motion on the manifold: b = Omega, sigma = chol(G^-1).
  /// The target is only consulted by Hessian- or Fisher-based metrics.
  static DiffusionSpec manifold_brownian(TargetPtr target, MetricField metric);
  /// Arbitrary drift/volatility; V defaults to sigma sigma^T.
  static DiffusionSpec custom(fd::VectorField drift, fd::MatrixField volatility, std::string name = "Custom");
};

/// x + b(x) dt + sigma(x) sqrt(dt) z with z drawn from `rng`.
Eigen::VectorXd em_step(const DiffusionSpec& spec, const Eigen::VectorXd& x, double dt, RandomStream& rng);
/// Same step with a caller-supplied standard normal vector.
Eigen::VectorXd em_step(const DiffusionSpec& spec, const Eigen::VectorXd& x, double dt, const Eigen::VectorXd& z);

/// [x0, x1, ..., x_steps].
std::vector<Eigen::VectorXd> simulate_path(const DiffusionSpec& spec, const Eigen::VectorXd& x0, double dt,
                                           long steps, RandomStream& rng);

/// sum_i b_i df/dx_i + 1/2 sum_ij V_ij d2f/dx_i dx_j by central differences
/// with absolute step h.
double generator_apply(const DiffusionSpec& spec, const fd::ScalarField& f, const Eigen::VectorXd& x,
                       double h = 1e-3);

/// div_M(G^-1 grad f) by nested central differences (relative step h).
double laplace_beltrami(const fd::ScalarField& f, const fd::MatrixField& metric, const Eigen::VectorXd& x,
                        double h = 1e-3);

/// |sum_i d_i(b_i pi) - 1/2 sum_ij d_i d_j(V_ij pi)| / pi(x), fourth-order
/// central differences with absolute step h.
double fokker_planck_residual(const TargetModel& target, const DiffusionSpec& spec, const Eigen::VectorXd& x,
                              double h = 1e-3);

}  // namespace geomala
