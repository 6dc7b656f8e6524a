#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geomala/finite_diff.hpp"
#include "geomala/targets.hpp"

namespace geomala {

enum class MetricKind { Identity, Constant, Fisher, SoftAbs, AbsEig, NearestPD, Custom };

enum class DerivativeMode { Analytic, FiniteDifference };

/// Recipe for a position-dependent metric tensor G(x).
///
/// Hessian-based kinds (SoftAbs, AbsEig, NearestPD) regularise the negative
/// Hessian H(x) = -d^2 log pi. Fisher uses the target's likelihood and
/// prior terms. Custom wraps an arbitrary SPD matrix field, mostly useful
/// for geometry checks.
struct MetricField {
  MetricKind kind = MetricKind::Identity;
  double alpha = 1e6;         // SoftAbs sharpness
  double delta = 1e-8;        // eigenvalue floor for AbsEig / NearestPD
  int max_iter = 100;         // NearestPD alternating projections
  Eigen::MatrixXd constant;   // Constant kind
  fd::MatrixField custom;     // Custom kind: x -> G(x)
  DerivativeMode derivatives = DerivativeMode::Analytic;
  double fd_step = fd::kRelStep;

  static MetricField identity();
  static MetricField constant_matrix(Eigen::MatrixXd g);
  static MetricField fisher();
  static MetricField soft_abs(double alpha = 1e6);
  static MetricField abs_eig(double delta = 1e-8);
  static MetricField nearest_pd(double delta = 1e-8, int max_iter = 100);
  static MetricField custom_field(fd::MatrixField g);

  bool is_constant() const { return kind == MetricKind::Identity || kind == MetricKind::Constant; }
  std::string describe() const;
};

MetricKind parse_metric_kind(const std::string& name);
std::string to_string(MetricKind kind);

/// G(x) and everything derived from it at one point. Immutable once built.
struct MetricEval {
  Eigen::MatrixXd G;
  Eigen::MatrixXd G_inv;
  double log_det_G = 0.0;
  Eigen::MatrixXd chol_G_inv;  // lower triangular, L L^T = G_inv
  /// (*dG_inv)[j](i, k) = d{G^-1}_{ik} / dx_j
  std::optional<std::vector<Eigen::MatrixXd>> dG_inv;
  bool regularised = false;        // eigenvalue floor or Cholesky jitter was applied
  bool nonsmooth_warning = false;  // finite differences straddled a kink of the metric
};

/// Builds G(x). `need_derivatives` also fills dG_inv, analytically where the
/// kind and target allow it and by central differences of G^-1 otherwise.
MetricEval eval_metric(const MetricField& field, const TargetModel& target,
                       const Eigen::VectorXd& x, bool need_derivatives);

/// t_alpha(l) = l coth(alpha l), with its series near 0.
double softabs(double lambda, double alpha);

/// G^-1 grad.
Eigen::VectorXd natural_gradient(const MetricEval& eval, const Eigen::VectorXd& grad);

struct DriftResult {
  Eigen::VectorXd value;
  bool nonsmooth_warning = false;
};

/// Lambda_i = 1/2 sum_j d_j {G^-1}_{ij}; requires eval.dG_inv.
Eigen::VectorXd lambda_from(const MetricEval& eval);
/// Omega_i = 1/2 |G|^-1/2 sum_j d_j (|G|^1/2 {G^-1}_{ij}); requires eval.dG_inv.
Eigen::VectorXd omega_from(const MetricEval& eval);

DriftResult lambda_drift(const MetricField& field, const TargetModel& target, const Eigen::VectorXd& x);
DriftResult omega_drift(const MetricField& field, const TargetModel& target, const Eigen::VectorXd& x);

/// x -> G(x) for this field/target pair.
fd::MatrixField metric_matrix_field(const MetricField& field, const TargetModel& target);

/// Riemannian divergence |G|^-1/2 sum_i d_i (|G|^1/2 v_i) by central
/// differences with per-coordinate step rel * (1 + |x_i|).
double divergence_local(const fd::VectorField& v, const Eigen::VectorXd& x,
                        const fd::MatrixField& metric, double rel = fd::kRelStep);

/// Symmetric projection followed by eigenvalue clipping at `delta`,
/// repeated until a fixed point or `max_iter`.
Eigen::MatrixXd nearest_pd(const Eigen::MatrixXd& a, double delta, int max_iter);

}  // namespace geomala
