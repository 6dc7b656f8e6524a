#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace geomala::fd {

/// Default relative step for first derivatives.
inline constexpr double kRelStep = 1e-5;

/// Scale-aware step for coordinate `xi`.
inline double step_for(double xi, double rel = kRelStep) { return rel * (1.0 + std::abs(xi)); }

using ScalarField = std::function<double(const Eigen::VectorXd&)>;
using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Central-difference gradient of a scalar field.
Eigen::VectorXd gradient(const ScalarField& f, const Eigen::VectorXd& x, double rel = kRelStep);

/// Central-difference Jacobian, J(i, j) = d v_i / d x_j.
Eigen::MatrixXd jacobian(const VectorField& v, const Eigen::VectorXd& x, double rel = kRelStep);

/// Central-difference partials of a matrix field: result[j] = dM/dx_j.
std::vector<Eigen::MatrixXd> matrix_partials(const MatrixField& m, const Eigen::VectorXd& x,
                                             double rel = kRelStep);

/// Central-difference Hessian of a scalar field with a fixed absolute step.
Eigen::MatrixXd hessian(const ScalarField& f, const Eigen::VectorXd& x, double h);

}  // namespace geomala::fd
