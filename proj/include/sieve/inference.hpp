#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sieve/bootstrap.hpp"
#include "sieve/core_model.hpp"
#include "sieve/fitted_model.hpp"
#include "sieve/solver.hpp"

namespace sieve {

/// Band center(x) +- C_alpha h(x) / sqrt(n) on a grid.
struct ScrResult {
  EvaluationGrid grid;
  Eigen::VectorXd center;
  Eigen::VectorXd half_width;
  double alpha = 0.05;
  double critical_value = 0.0;
  Scaling scaling = Scaling::unit;
  std::size_t n = 0;

  Eigen::VectorXd lower() const { return center - half_width; }
  Eigen::VectorXd upper() const { return center + half_width; }
  /// True when every value lies inside the closed band.
  bool covers(const Eigen::VectorXd& values) const;
};

ScrResult build_scr(const FittedModel& fitted, const BootstrapResult& boot, const EvaluationGrid& grid, double alpha);

struct ScrTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<std::pair<double, bool>> reject_at;
  std::string null_description;
};

/// T = max_x sqrt(n) |Q(x) - Q_null(x)| / h(x); p = (1 + #{sup >= T}) / (B + 1).
ScrTestResult scr_test(const FittedModel& fitted, const BootstrapResult& boot, const EvaluationGrid& grid,
                       const Eigen::VectorXd& null_values, const std::vector<double>& alphas,
                       std::string null_description = "user-supplied null");

/// Tests whether covariates outside `kept` are redundant: the null is the
/// reduced fit, which sees only the kept coordinates (0-based, increasing).
ScrTestResult redundancy_test(const FittedModel& full, const FittedModel& reduced,
                              std::span<const std::size_t> kept, const BootstrapResult& boot,
                              const EvaluationGrid& grid, const std::vector<double>& alphas);

/// Linear null model Q(x) = a + c^T x, fitted by M-estimation on the
/// observations inside `domain`.
struct LinearFit {
  double intercept = 0.0;
  Eigen::VectorXd slope;
  Eigen::VectorXd predict(const Eigen::MatrixXd& points) const;
};

LinearFit fit_linear(const Dataset& data, const LossSpec& loss, const Domain& domain, const SolverConfig& solver = {});

}  // namespace sieve
