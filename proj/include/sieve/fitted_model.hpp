#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sieve/basis.hpp"
#include "sieve/loss.hpp"

namespace sieve {

/// One accepted solver step: smoothing level index and smoothed objective.
struct TracePoint {
  std::size_t level;
  double objective;
};

/// Sieve M-estimate Q(x) = theta^T b_omega(x) with solver diagnostics.
struct FittedModel {
  Eigen::VectorXd theta;
  SieveBasis basis;
  LossSpec loss;
  /// sum_i rho(Y_i - theta^T b_omega(X_i)) over every training observation.
  double objective_value = 0.0;
  std::size_t solver_iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  double ridge = 0.0;
  std::size_t in_domain_count = 0;
  std::vector<TracePoint> trace;

  const Domain& domain() const noexcept { return basis.domain(); }

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const { return basis.eval(x).dot(theta); }
  Eigen::VectorXd predict_points(const Eigen::MatrixXd& points) const { return basis.design(points) * theta; }
};

}  // namespace sieve
