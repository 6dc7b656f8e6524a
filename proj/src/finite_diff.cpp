#include "geomala/finite_diff.hpp"

namespace geomala::fd {

Eigen::VectorXd gradient(const ScalarField& f, const Eigen::VectorXd& x, double rel) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step_for(x[j], rel);
    y[j] = x[j] + h;
    const double up = f(y);
    y[j] = x[j] - h;
    const double down = f(y);
    y[j] = x[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd jacobian(const VectorField& v, const Eigen::VectorXd& x, double rel) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step_for(x[j], rel);
    y[j] = x[j] + h;
    const Eigen::VectorXd up = v(y);
    y[j] = x[j] - h;
    const Eigen::VectorXd down = v(y);
    y[j] = x[j];
    if (j == 0) jac.resize(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

std::vector<Eigen::MatrixXd> matrix_partials(const MatrixField& m, const Eigen::VectorXd& x,
                                             double rel) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step_for(x[j], rel);
    y[j] = x[j] + h;
    const Eigen::MatrixXd up = m(y);
    y[j] = x[j] - h;
    const Eigen::MatrixXd down = m(y);
    y[j] = x[j];
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

Eigen::MatrixXd hessian(const ScalarField& f, const Eigen::VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      y[i] = x[i] + h;
      y[j] = x[j] + h;
      const double pp = f(y);
      y[j] = x[j] - h;
      const double pm = f(y);
      y[i] = x[i] - h;
      const double mm = f(y);
      y[j] = x[j] + h;
      const double mp = f(y);
      y[i] = x[i];
      y[j] = x[j];
      hess(i, j) = hess(j, i) = (pp - pm - mp + mm) / (4.0 * h * h);
    }
  }
  return hess;
}

}  // namespace geomala::fd
