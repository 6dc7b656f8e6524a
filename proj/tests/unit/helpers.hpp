#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace testing {

inline Eigen::VectorXd random_point(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = z(rng);
  return x;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double shift = 0.5) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Smooth SPD field L(x) L(x)^T + 0.5 I with L entries c + d sin(w.x + phase).
struct SmoothSpdField {
  Eigen::MatrixXd c, d, phase;
  std::vector<Eigen::VectorXd> w;
  Eigen::Index n;

  SmoothSpdField(std::mt19937_64& rng, Eigen::Index dim) : n(dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    c.resize(n, n);
    d.resize(n, n);
    phase.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        c(i, j) = u(rng);
        d(i, j) = 0.5 * u(rng);
        phase(i, j) = 3.0 * u(rng);
        Eigen::VectorXd wij(n);
        for (Eigen::Index k = 0; k < n; ++k) wij[k] = u(rng);
        w.push_back(wij);
      }
    }
  }

  Eigen::MatrixXd operator()(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd l(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        l(i, j) = c(i, j) + d(i, j) * std::sin(w[static_cast<std::size_t>(i * n + j)].dot(x) + phase(i, j));
    return l * l.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  }
};

}  // namespace testing
