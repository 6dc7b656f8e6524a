#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geomala {

/// The two summands of the Fisher-style metric: expected negative Hessian
/// of the log-likelihood and negative Hessian of the log-prior.
struct FisherTerms {
  Eigen::MatrixXd likelihood;
  Eigen::MatrixXd prior;

  Eigen::MatrixXd total() const { return likelihood + prior; }
};

/// An unnormalised, differentiable log-density on R^n.
///
/// Public entry points validate dimensions and dispatch to the protected
/// hooks. Evaluations are const and hold no mutable state, so a single
/// target may be shared between concurrently running chains.
class TargetModel {
 public:
  explicit TargetModel(Eigen::Index dim);
  virtual ~TargetModel() = default;

  Eigen::Index dim() const { return dim_; }
  virtual std::string name() const = 0;

  /// log pi(x) up to an additive constant; -inf outside the support.
  double log_density(const Eigen::VectorXd& x) const;

  /// Gradient of log_density. When `at_kink` is given it is set to true if x
  /// sits on a non-differentiable point and the conventional subgradient 0
  /// was used for at least one coordinate.
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x, bool* at_kink = nullptr) const;

  virtual bool has_hessian() const { return false; }
  /// Second derivatives of log pi (not negated).
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const;

  virtual bool has_fisher() const { return false; }
  FisherTerms fisher_terms(const Eigen::VectorXd& x) const;

  /// Whether d/dx_j of the Fisher likelihood part is available in closed
  /// form. The prior part is assumed constant in x.
  virtual bool has_fisher_derivatives() const { return false; }
  std::vector<Eigen::MatrixXd> fisher_likelihood_partials(const Eigen::VectorXd& x) const;

 protected:
  virtual double do_log_density(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const = 0;
  virtual Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const;
  virtual FisherTerms do_fisher(const Eigen::VectorXd& x) const;
  virtual std::vector<Eigen::MatrixXd> do_fisher_partials(const Eigen::VectorXd& x) const;

 private:
  void check_dim(const Eigen::VectorXd& x, const char* op) const;

  Eigen::Index dim_;
};

using TargetPtr = std::shared_ptr<const TargetModel>;

class StdGaussian final : public TargetModel {
 public:
  explicit StdGaussian(Eigen::Index n);
  std::string name() const override { return "StdGaussian"; }
  bool has_hessian() const override { return true; }
  bool has_fisher() const override { return true; }
  bool has_fisher_derivatives() const override { return true; }

 protected:
  double do_log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const override;
  Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const override;
  FisherTerms do_fisher(const Eigen::VectorXd& x) const override;
  std::vector<Eigen::MatrixXd> do_fisher_partials(const Eigen::VectorXd& x) const override;
};

class Gaussian final : public TargetModel {
 public:
  Gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
  std::string name() const override { return "Gaussian"; }
  bool has_hessian() const override { return true; }
  bool has_fisher() const override { return true; }
  bool has_fisher_derivatives() const override { return true; }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& precision() const { return precision_; }

 protected:
  double do_log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const override;
  Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const override;
  FisherTerms do_fisher(const Eigen::VectorXd& x) const override;
  std::vector<Eigen::MatrixXd> do_fisher_partials(const Eigen::VectorXd& x) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
};

/// Targets whose density factorises into identical one-dimensional terms.
/// Subclasses provide the scalar log-density and its first two derivatives.
class ProductTarget : public TargetModel {
 public:
  using TargetModel::TargetModel;
  bool has_hessian() const override { return true; }

  virtual double log_density_1d(double x) const = 0;
  virtual double grad_1d(double x, bool& at_kink) const = 0;
  virtual double hessian_1d(double x) const = 0;

 protected:
  double do_log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const override;
  Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const override;
};

/// Per-coordinate density proportional to 1 / (1 + x^2).
class CauchyProduct final : public ProductTarget {
 public:
  explicit CauchyProduct(Eigen::Index n) : ProductTarget(n) {}
  std::string name() const override { return "CauchyProduct"; }
  double log_density_1d(double x) const override;
  double grad_1d(double x, bool& at_kink) const override;
  double hessian_1d(double x) const override;
};

/// Per-coordinate density proportional to exp(-x^4).
class QuarticProduct final : public ProductTarget {
 public:
  explicit QuarticProduct(Eigen::Index n) : ProductTarget(n) {}
  std::string name() const override { return "QuarticProduct"; }
  double log_density_1d(double x) const override;
  double grad_1d(double x, bool& at_kink) const override;
  double hessian_1d(double x) const override;
};

/// Per-coordinate density proportional to exp(-|x|^beta). For beta <= 1
/// the gradient at 0, and for beta < 2 the Hessian at 0, are taken as 0.
class ExpPower final : public ProductTarget {
 public:
  ExpPower(Eigen::Index n, double beta);
  std::string name() const override { return "ExpPower"; }
  double beta() const { return beta_; }
  double log_density_1d(double x) const override;
  double grad_1d(double x, bool& at_kink) const override;
  double hessian_1d(double x) const override;

 private:
  double beta_;
};

/// Bayesian logistic regression with an isotropic Gaussian prior.
class BayesLogistic final : public TargetModel {
 public:
  BayesLogistic(Eigen::MatrixXd design, Eigen::VectorXd labels, double prior_var);

  /// Reads a CSV with a header row and columns x1..xn,y.
  static BayesLogistic from_csv(const std::string& path, double prior_var);

  /// Design with iid N(0,1) entries and labels drawn from the model at a
  /// random coefficient vector; deterministic in `seed`.
  static BayesLogistic synthetic(Eigen::Index rows, Eigen::Index cols, double prior_var,
                                 std::uint64_t seed);

  std::string name() const override { return "BayesLogistic"; }
  bool has_hessian() const override { return true; }
  bool has_fisher() const override { return true; }
  bool has_fisher_derivatives() const override { return true; }

  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double prior_var() const { return prior_var_; }

 protected:
  double do_log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const override;
  Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const override;
  FisherTerms do_fisher(const Eigen::VectorXd& x) const override;
  std::vector<Eigen::MatrixXd> do_fisher_partials(const Eigen::VectorXd& x) const override;

 private:
  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  double prior_var_;
};

/// A user-supplied log-density. Missing derivatives fall back to central
/// finite differences.
class FunctionTarget final : public TargetModel {
 public:
  using LogDensity = std::function<double(const Eigen::VectorXd&)>;
  using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Hessian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  FunctionTarget(Eigen::Index n, std::string label, LogDensity log_density,
                 Gradient grad = nullptr, Hessian hessian = nullptr);

  std::string name() const override { return label_; }
  bool has_hessian() const override { return true; }

 protected:
  double do_log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd do_grad(const Eigen::VectorXd& x, bool& at_kink) const override;
  Eigen::MatrixXd do_hessian(const Eigen::VectorXd& x) const override;

 private:
  std::string label_;
  LogDensity log_density_;
  Gradient grad_;
  Hessian hessian_;
};

}  // namespace geomala
