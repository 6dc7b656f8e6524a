#include "geomala/targets.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "geomala/error.hpp"
#include "geomala/finite_diff.hpp"
#include "geomala/random.hpp"

namespace geomala {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TargetModel::TargetModel(Index dim) : dim_(dim) {
  if (dim <= 0) throw UsageError(fmt::format("target dimension must be positive, got {}", dim));
}

void TargetModel::check_dim(const VectorXd& x, const char* op) const {
  if (x.size() != dim_) {
    throw UsageError(fmt::format("{}: {} expects dimension {}, got {}", name(), op, dim_, x.size()));
  }
}

double TargetModel::log_density(const VectorXd& x) const {
  check_dim(x, "log_density");
  return do_log_density(x);
}

VectorXd TargetModel::grad_log_density(const VectorXd& x, bool* at_kink) const {
  check_dim(x, "grad_log_density");
  bool kink = false;
  VectorXd g = do_grad(x, kink);
  if (at_kink) *at_kink = kink;
  return g;
}

MatrixXd TargetModel::hessian_log_density(const VectorXd& x) const {
  check_dim(x, "hessian_log_density");
  if (!has_hessian()) throw CapabilityError(name() + " does not provide a Hessian");
  return do_hessian(x);
}

FisherTerms TargetModel::fisher_terms(const VectorXd& x) const {
  check_dim(x, "fisher_terms");
  if (!has_fisher()) throw CapabilityError(name() + " has no likelihood structure for a Fisher metric");
  return do_fisher(x);
}

std::vector<MatrixXd> TargetModel::fisher_likelihood_partials(const VectorXd& x) const {
  check_dim(x, "fisher_likelihood_partials");
  if (!has_fisher_derivatives()) {
    throw CapabilityError(name() + " has no closed-form Fisher derivatives");
  }
  return do_fisher_partials(x);
}

MatrixXd TargetModel::do_hessian(const VectorXd&) const {
  throw CapabilityError(name() + " does not provide a Hessian");
}

FisherTerms TargetModel::do_fisher(const VectorXd&) const {
  throw CapabilityError(name() + " has no likelihood structure for a Fisher metric");
}

std::vector<MatrixXd> TargetModel::do_fisher_partials(const VectorXd&) const {
  throw CapabilityError(name() + " has no closed-form Fisher derivatives");
}

// --- StdGaussian -----------------------------------------------------------

StdGaussian::StdGaussian(Index n) : TargetModel(n) {}

double StdGaussian::do_log_density(const VectorXd& x) const { return -0.5 * x.squaredNorm(); }

VectorXd StdGaussian::do_grad(const VectorXd& x, bool&) const { return -x; }

MatrixXd StdGaussian::do_hessian(const VectorXd&) const {
  return -MatrixXd::Identity(dim(), dim());
}

FisherTerms StdGaussian::do_fisher(const VectorXd&) const {
  return {MatrixXd::Identity(dim(), dim()), MatrixXd::Zero(dim(), dim())};
}

std::vector<MatrixXd> StdGaussian::do_fisher_partials(const VectorXd&) const {
  return std::vector<MatrixXd>(static_cast<std::size_t>(dim()), MatrixXd::Zero(dim(), dim()));
}

// --- Gaussian --------------------------------------------------------------

Gaussian::Gaussian(VectorXd mean, const MatrixXd& cov)
    : TargetModel(mean.size()), mean_(std::move(mean)) {
  if (cov.rows() != dim() || cov.cols() != dim()) {
    throw UsageError(fmt::format("Gaussian: covariance must be {0}x{0}", dim()));
  }
  Eigen::LLT<MatrixXd> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) throw UsageError("Gaussian: covariance is not positive definite");
  precision_ = llt.solve(MatrixXd::Identity(dim(), dim()));
  precision_ = (0.5 * (precision_ + precision_.transpose())).eval();
}

double Gaussian::do_log_density(const VectorXd& x) const {
  const VectorXd d = x - mean_;
  return -0.5 * d.dot(precision_ * d);
}

VectorXd Gaussian::do_grad(const VectorXd& x, bool&) const { return -(precision_ * (x - mean_)); }

MatrixXd Gaussian::do_hessian(const VectorXd&) const { return -precision_; }

FisherTerms Gaussian::do_fisher(const VectorXd&) const {
  return {precision_, MatrixXd::Zero(dim(), dim())};
}

std::vector<MatrixXd> Gaussian::do_fisher_partials(const VectorXd&) const {
  return std::vector<MatrixXd>(static_cast<std::size_t>(dim()), MatrixXd::Zero(dim(), dim()));
}

// --- Product targets -------------------------------------------------------

double ProductTarget::do_log_density(const VectorXd& x) const {
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) total += log_density_1d(x[i]);
  return total;
}

VectorXd ProductTarget::do_grad(const VectorXd& x, bool& at_kink) const {
  VectorXd g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    bool kink = false;
    g[i] = grad_1d(x[i], kink);
    at_kink = at_kink || kink;
  }
  return g;
}

MatrixXd ProductTarget::do_hessian(const VectorXd& x) const {
  MatrixXd h = MatrixXd::Zero(x.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) h(i, i) = hessian_1d(x[i]);
  return h;
}

double CauchyProduct::log_density_1d(double x) const { return -std::log1p(x * x); }

double CauchyProduct::grad_1d(double x, bool&) const { return -2.0 * x / (1.0 + x * x); }

double CauchyProduct::hessian_1d(double x) const {
  const double s = 1.0 + x * x;
  return (2.0 * x * x - 2.0) / (s * s);
}

double QuarticProduct::log_density_1d(double x) const {
  const double x2 = x * x;
  return -x2 * x2;
}

double QuarticProduct::grad_1d(double x, bool&) const { return -4.0 * x * x * x; }

double QuarticProduct::hessian_1d(double x) const { return -12.0 * x * x; }

ExpPower::ExpPower(Index n, double beta) : ProductTarget(n), beta_(beta) {
  if (!(beta > 0.0)) throw UsageError(fmt::format("ExpPower: beta must be positive, got {}", beta));
}

double ExpPower::log_density_1d(double x) const { return -std::pow(std::abs(x), beta_); }

double ExpPower::grad_1d(double x, bool& at_kink) const {
  if (x == 0.0) {
    at_kink = beta_ <= 1.0;
    return 0.0;
  }
  const double s = x > 0.0 ? 1.0 : -1.0;
  return -beta_ * std::pow(std::abs(x), beta_ - 1.0) * s;
}

double ExpPower::hessian_1d(double x) const {
  if (x == 0.0 && beta_ < 2.0) return 0.0;
  return -beta_ * (beta_ - 1.0) * std::pow(std::abs(x), beta_ - 2.0);
}

// --- BayesLogistic ---------------------------------------------------------

namespace {

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

BayesLogistic::BayesLogistic(MatrixXd design, VectorXd labels, double prior_var)
    : TargetModel(design.cols()),
      design_(std::move(design)),
      labels_(std::move(labels)),
      prior_var_(prior_var) {
  if (labels_.size() != design_.rows()) {
    throw UsageError(fmt::format("BayesLogistic: {} labels for {} design rows", labels_.size(),
                                 design_.rows()));
  }
  for (Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0.0 && labels_[i] != 1.0) {
      throw UsageError(fmt::format("BayesLogistic: label {} at row {} is not 0 or 1", labels_[i], i + 1));
    }
  }
  if (!(prior_var > 0.0)) throw UsageError("BayesLogistic: prior_var must be positive");
}

BayesLogistic BayesLogistic::from_csv(const std::string& path, double prior_var) {
  std::ifstream in(path);
  if (!in) throw UsageError("BayesLogistic: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("BayesLogistic: empty file " + path);
  Index columns = 1;
  for (char c : line) columns += (c == ',');
  if (columns < 2) throw UsageError("BayesLogistic: need columns x1..xn,y in " + path);

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw UsageError(fmt::format("BayesLogistic: {}:{}: bad number '{}'", path, line_no, cell));
      }
    }
    if (static_cast<Index>(row.size()) != columns) {
      throw UsageError(fmt::format("BayesLogistic: {}:{}: expected {} columns, got {}", path,
                                   line_no, columns, row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("BayesLogistic: no data rows in " + path);

  MatrixXd design(static_cast<Index>(rows.size()), columns - 1);
  VectorXd labels(static_cast<Index>(rows.size()));
  for (Index r = 0; r < design.rows(); ++r) {
    for (Index c = 0; c + 1 < columns; ++c) design(r, c) = rows[r][c];
    labels[r] = rows[r][columns - 1];
  }
  return BayesLogistic(std::move(design), std::move(labels), prior_var);
}

BayesLogistic BayesLogistic::synthetic(Index rows, Index cols, double prior_var, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  MatrixXd design(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) design(r, c) = rng.normal();
  const VectorXd truth = rng.normal_vector(cols);
  VectorXd labels(rows);
  for (Index r = 0; r < rows; ++r) labels[r] = rng.uniform() < logistic(design.row(r).dot(truth)) ? 1.0 : 0.0;
  return BayesLogistic(std::move(design), std::move(labels), prior_var);
}

VectorXd BayesLogistic::probabilities(const VectorXd& x) const {
  const VectorXd eta = design_ * x;
  return eta.unaryExpr([](double e) { return logistic(e); });
}

double BayesLogistic::do_log_density(const VectorXd& x) const {
  const VectorXd eta = design_ * x;
  double total = 0.0;
  for (Index i = 0; i < eta.size(); ++i) total += labels_[i] * eta[i] - softplus(eta[i]);
  return total - 0.5 * x.squaredNorm() / prior_var_;
}

VectorXd BayesLogistic::do_grad(const VectorXd& x, bool&) const {
  return design_.transpose() * (labels_ - probabilities(x)) - x / prior_var_;
}

MatrixXd BayesLogistic::do_hessian(const VectorXd& x) const { return -do_fisher(x).total(); }

FisherTerms BayesLogistic::do_fisher(const VectorXd& x) const {
  const VectorXd p = probabilities(x);
  const VectorXd w = p.array() * (1.0 - p.array());
  MatrixXd likelihood = design_.transpose() * w.asDiagonal() * design_;
  likelihood = (0.5 * (likelihood + likelihood.transpose())).eval();
  return {std::move(likelihood), MatrixXd::Identity(dim(), dim()) / prior_var_};
}

std::vector<MatrixXd> BayesLogistic::do_fisher_partials(const VectorXd& x) const {
  // d/dx_j [p(1-p)] = p(1-p)(1-2p) X_ij
  const VectorXd p = probabilities(x);
  const VectorXd dw = p.array() * (1.0 - p.array()) * (1.0 - 2.0 * p.array());
  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(dim()));
  for (Index j = 0; j < dim(); ++j) {
    const VectorXd weights = dw.cwiseProduct(design_.col(j));
    MatrixXd d = design_.transpose() * weights.asDiagonal() * design_;
    out.push_back(0.5 * (d + d.transpose()));
  }
  return out;
}

// --- FunctionTarget --------------------------------------------------------

FunctionTarget::FunctionTarget(Index n, std::string label, LogDensity log_density, Gradient grad,
                               Hessian hessian)
    : TargetModel(n),
      label_(std::move(label)),
      log_density_(std::move(log_density)),
      grad_(std::move(grad)),
      hessian_(std::move(hessian)) {
  if (!log_density_) throw UsageError("FunctionTarget: log-density callable is required");
}

double FunctionTarget::do_log_density(const VectorXd& x) const { return log_density_(x); }

VectorXd FunctionTarget::do_grad(const VectorXd& x, bool&) const {
  if (grad_) return grad_(x);
  return fd::gradient(log_density_, x);
}

MatrixXd FunctionTarget::do_hessian(const VectorXd& x) const {
  if (hessian_) return hessian_(x);
  MatrixXd h;
  if (grad_) {
    h = fd::jacobian(grad_, x);
  } else {
    h = fd::hessian(log_density_, x, 1e-4 * (1.0 + x.cwiseAbs().maxCoeff()));
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace geomala
