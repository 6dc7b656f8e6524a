#include "geomala/metrics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "geomala/error.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MetricField MetricField::identity() { return {}; }

MetricField MetricField::constant_matrix(MatrixXd g) {
  MetricField f;
  f.kind = MetricKind::Constant;
  f.constant = std::move(g);
  return f;
}

MetricField MetricField::fisher() {
  MetricField f;
  f.kind = MetricKind::Fisher;
  return f;
}

MetricField MetricField::soft_abs(double alpha) {
  MetricField f;
  f.kind = MetricKind::SoftAbs;
  f.alpha = alpha;
  return f;
}

MetricField MetricField::abs_eig(double delta) {
  MetricField f;
  f.kind = MetricKind::AbsEig;
  f.delta = delta;
  return f;
}

MetricField MetricField::nearest_pd(double delta, int max_iter) {
  MetricField f;
  f.kind = MetricKind::NearestPD;
  f.delta = delta;
  f.max_iter = max_iter;
  return f;
}

MetricField MetricField::custom_field(fd::MatrixField g) {
  MetricField f;
  f.kind = MetricKind::Custom;
  f.custom = std::move(g);
  return f;
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Identity: return "Identity";
    case MetricKind::Constant: return "Constant";
    case MetricKind::Fisher: return "Fisher";
    case MetricKind::SoftAbs: return "SoftAbs";
    case MetricKind::AbsEig: return "AbsEig";
    case MetricKind::NearestPD: return "NearestPD";
    case MetricKind::Custom: return "Custom";
  }
  return "?";
}

MetricKind parse_metric_kind(const std::string& name) {
  for (auto k : {MetricKind::Identity, MetricKind::Constant, MetricKind::Fisher, MetricKind::SoftAbs,
                 MetricKind::AbsEig, MetricKind::NearestPD}) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown metric kind '" + name + "'");
}

std::string MetricField::describe() const {
  switch (kind) {
    case MetricKind::SoftAbs: return fmt::format("SoftAbs(alpha={})", alpha);
    case MetricKind::AbsEig: return fmt::format("AbsEig(delta={})", delta);
    case MetricKind::NearestPD: return fmt::format("NearestPD(delta={},max_iter={})", delta, max_iter);
    default: return to_string(kind);
  }
}

double softabs(double lambda, double alpha) {
  const double z = alpha * lambda;
  if (std::abs(z) < 1e-4) return 1.0 / alpha + alpha * lambda * lambda / 3.0;
  return lambda / std::tanh(z);
}

MatrixXd nearest_pd(const MatrixXd& a, double delta, int max_iter) {
  MatrixXd x = a;
  for (int it = 0; it < std::max(1, max_iter); ++it) {
    const MatrixXd sym = 0.5 * (x + x.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericError("nearest_pd: eigendecomposition failed", VectorXd());
    const VectorXd clipped = eig.eigenvalues().cwiseMax(delta);
    MatrixXd next = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    next = (0.5 * (next + next.transpose())).eval();
    const double change = (next - x).norm();
    x = std::move(next);
    if (it > 0 && change <= 1e-14 * (1.0 + x.norm())) break;
  }
  return x;
}

namespace {

struct Core {
  MatrixXd G;
  MatrixXd G_inv;
  double log_det = 0.0;
  bool regularised = false;
  int negative_count = 0;  // negative eigenvalues of the raw negative Hessian
};

// Cholesky with the jitter ladder: 1e-10 * mean(diag), x10 per retry, 3 retries.
Eigen::LLT<MatrixXd> robust_llt(const MatrixXd& m, const VectorXd& x, bool& jittered,
                                const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) return llt;
  double jitter = 1e-10 * std::max(std::abs(m.diagonal().mean()), 1e-300);
  const Index n = m.rows();
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
    llt.compute(m + jitter * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      jittered = true;
      return llt;
    }
  }
  throw NumericError(fmt::format("{}: Cholesky factorisation failed after jitter", what), x);
}

Core from_spd(MatrixXd g, const VectorXd& x) {
  Core c;
  g = (0.5 * (g + g.transpose())).eval();
  if (!g.allFinite()) throw NumericError("metric: non-finite metric tensor", x);
  auto llt = robust_llt(g, x, c.regularised, "metric");
  const Index n = g.rows();
  c.G_inv = llt.solve(MatrixXd::Identity(n, n));
  c.G_inv = (0.5 * (c.G_inv + c.G_inv.transpose())).eval();
  c.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  c.G = std::move(g);
  return c;
}

MatrixXd negative_hessian(const TargetModel& target, const VectorXd& x) {
  if (!target.has_hessian()) throw CapabilityError(target.name() + ": Hessian-based metric needs a Hessian");
  MatrixXd h = -target.hessian_log_density(x);
  if (!h.allFinite()) throw NumericError("metric: non-finite Hessian", x);
  return 0.5 * (h + h.transpose());
}

Core from_spectrum(const MatrixXd& h, const VectorXd& x, const MetricField& field) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
  if (eig.info() != Eigen::Success) throw NumericError("metric: eigendecomposition failed", x);
  const VectorXd& d = eig.eigenvalues();
  const MatrixXd& u = eig.eigenvectors();
  Core c;
  c.negative_count = static_cast<int>((d.array() < 0.0).count());
  VectorXd t(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    if (field.kind == MetricKind::SoftAbs) {
      t[i] = softabs(d[i], field.alpha);
    } else {
      t[i] = std::abs(d[i]);
      if (t[i] < field.delta) {
        t[i] = field.delta;
        c.regularised = true;
      }
    }
    if (!(t[i] > 0.0)) {
      // delta = 0 on a singular Hessian; fall back to the smallest positive double
      t[i] = std::numeric_limits<double>::min();
      c.regularised = true;
    }
  }
  c.G = u * t.asDiagonal() * u.transpose();
  c.G = (0.5 * (c.G + c.G.transpose())).eval();
  c.G_inv = u * t.cwiseInverse().asDiagonal() * u.transpose();
  c.G_inv = (0.5 * (c.G_inv + c.G_inv.transpose())).eval();
  c.log_det = t.array().log().sum();
  return c;
}

Core eval_core(const MetricField& field, const TargetModel& target, const VectorXd& x) {
  const Index n = target.dim();
  switch (field.kind) {
    case MetricKind::Identity: {
      Core c;
      c.G = MatrixXd::Identity(n, n);
      c.G_inv = MatrixXd::Identity(n, n);
      return c;
    }
    case MetricKind::Constant:
      if (field.constant.rows() != n || field.constant.cols() != n) {
        throw UsageError(fmt::format("metric: constant matrix must be {0}x{0}", n));
      }
      return from_spd(field.constant, x);
    case MetricKind::Custom:
      if (!field.custom) throw UsageError("metric: custom field has no callable");
      return from_spd(field.custom(x), x);
    case MetricKind::Fisher:
      return from_spd(target.fisher_terms(x).total(), x);
    case MetricKind::SoftAbs:
    case MetricKind::AbsEig:
      return from_spectrum(negative_hessian(target, x), x, field);
    case MetricKind::NearestPD: {
      const MatrixXd h = negative_hessian(target, x);
      Core c = from_spectrum(nearest_pd(h, field.delta, field.max_iter), x, field);
      Eigen::SelfAdjointEigenSolver<MatrixXd> raw(h, Eigen::EigenvaluesOnly);
      c.negative_count = static_cast<int>((raw.eigenvalues().array() < 0.0).count());
      c.regularised = c.regularised || (raw.eigenvalues().array() < field.delta).any();
      return c;
    }
  }
  throw UsageError("metric: unknown kind");
}

bool analytic_available(const MetricField& field, const TargetModel& target) {
  if (field.is_constant()) return true;
  return field.derivatives == DerivativeMode::Analytic && field.kind == MetricKind::Fisher &&
         target.has_fisher_derivatives();
}

}  // namespace

MetricEval eval_metric(const MetricField& field, const TargetModel& target, const VectorXd& x,
                       bool need_derivatives) {
  if (x.size() != target.dim()) {
    throw UsageError(fmt::format("metric: expected dimension {}, got {}", target.dim(), x.size()));
  }
  Core core = eval_core(field, target, x);
  MetricEval out;
  out.regularised = core.regularised;
  bool jittered = false;
  auto llt = robust_llt(core.G_inv, x, jittered, "metric inverse");
  out.regularised = out.regularised || jittered;
  out.chol_G_inv = llt.matrixL().toDenseMatrix();
  out.G = std::move(core.G);
  out.G_inv = std::move(core.G_inv);
  out.log_det_G = core.log_det;

  if (!need_derivatives) return out;
  const Index n = target.dim();
  if (field.is_constant()) {
    out.dG_inv = std::vector<MatrixXd>(static_cast<std::size_t>(n), MatrixXd::Zero(n, n));
  } else if (analytic_available(field, target)) {
    // dG^-1 = -G^-1 (dG) G^-1, with the prior part constant.
    std::vector<MatrixXd> partials = target.fisher_likelihood_partials(x);
    for (auto& p : partials) p = -(out.G_inv * p * out.G_inv);
    out.dG_inv = std::move(partials);
  } else {
    std::vector<MatrixXd> partials;
    partials.reserve(static_cast<std::size_t>(n));
    VectorXd y = x;
    for (Index j = 0; j < n; ++j) {
      const double h = fd::step_for(x[j], field.fd_step);
      y[j] = x[j] + h;
      const Core up = eval_core(field, target, y);
      y[j] = x[j] - h;
      const Core down = eval_core(field, target, y);
      y[j] = x[j];
      partials.push_back((up.G_inv - down.G_inv) / (2.0 * h));
      if (up.regularised || down.regularised || core.regularised ||
          up.negative_count != down.negative_count || up.negative_count != core.negative_count) {
        out.nonsmooth_warning = true;
      }
    }
    out.dG_inv = std::move(partials);
  }
  return out;
}

VectorXd natural_gradient(const MetricEval& eval, const VectorXd& grad) { return eval.G_inv * grad; }

VectorXd lambda_from(const MetricEval& eval) {
  if (!eval.dG_inv) throw UsageError("lambda_drift: metric evaluated without derivatives");
  const auto& d = *eval.dG_inv;
  const Index n = eval.G.rows();
  VectorXd lambda = VectorXd::Zero(n);
  for (Index j = 0; j < n; ++j) lambda += d[static_cast<std::size_t>(j)].col(j);
  // column j of d_j G^-1 has entries d_j {G^-1}_{ij}
  return 0.5 * lambda;
}

VectorXd omega_from(const MetricEval& eval) {
  if (!eval.dG_inv) throw UsageError("omega_drift: metric evaluated without derivatives");
  const auto& d = *eval.dG_inv;
  const Index n = eval.G.rows();
  // d_j log|G| = -tr(G d_j G^-1)
  VectorXd dlogdet(n);
  for (Index j = 0; j < n; ++j) {
    dlogdet[j] = -(eval.G.cwiseProduct(d[static_cast<std::size_t>(j)].transpose())).sum();
  }
  return lambda_from(eval) + 0.25 * (eval.G_inv * dlogdet);
}

DriftResult lambda_drift(const MetricField& field, const TargetModel& target, const VectorXd& x) {
  const MetricEval e = eval_metric(field, target, x, true);
  return {lambda_from(e), e.nonsmooth_warning};
}

DriftResult omega_drift(const MetricField& field, const TargetModel& target, const VectorXd& x) {
  const MetricEval e = eval_metric(field, target, x, true);
  return {omega_from(e), e.nonsmooth_warning};
}

fd::MatrixField metric_matrix_field(const MetricField& field, const TargetModel& target) {
  return [&field, &target](const VectorXd& y) { return eval_metric(field, target, y, false).G; };
}

double divergence_local(const fd::VectorField& v, const VectorXd& x, const fd::MatrixField& metric,
                        double rel) {
  auto half_log_det = [&](const VectorXd& y) {
    Eigen::LLT<MatrixXd> llt(metric(y));
    if (llt.info() != Eigen::Success) throw NumericError("divergence_local: metric not SPD", y);
    return llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const double base = half_log_det(x);
  double total = 0.0;
  VectorXd y = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = fd::step_for(x[i], rel);
    y[i] = x[i] + h;
    const double up = std::exp(half_log_det(y) - base) * v(y)[i];
    y[i] = x[i] - h;
    const double down = std::exp(half_log_det(y) - base) * v(y)[i];
    y[i] = x[i];
    total += (up - down) / (2.0 * h);
  }
  return total;
}

}  // namespace geomala
