#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sieve/basis.hpp"
#include "sieve/core_model.hpp"
#include "sieve/fitted_model.hpp"
#include "sieve/loss.hpp"

namespace sieve {

struct SolverConfig {
  /// Newton iterations allowed per smoothing level.
  std::size_t max_iterations = 200;
  /// Stop when |grad| / (rows * psi_scale) <= gradient_tolerance * (1 + |theta|).
  double gradient_tolerance = 1e-8;
  /// Stop a level when a full step lowers the objective by less than this (relative).
  double objective_tolerance = 1e-14;
  /// Smoothing levels as multiples of the response scale. Empty selects the
  /// default: {1e-1, 1e-3, 1e-5, 1e-8} for kinked losses, {0} otherwise.
  std::vector<double> smoothing_schedule;
  /// Absolute ridge weight; unset means 1e-10 tr(B^T B) / K.
  std::optional<double> ridge;

  void validate() const;
};

/// Minimizer of sum_i rho(y_i - theta^T row_i) + ridge |theta|^2 / 2.
struct MinimizeResult {
  Eigen::VectorXd theta;
  /// Unsmoothed loss sum at theta, without the ridge term.
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  double ridge = 0.0;
  std::vector<TracePoint> trace;
};

/// Low-level entry point over an explicit design matrix (rows are
/// observations). Throws EmptyDesignError for zero rows and
/// SingularDesignError when rows < columns, or when an explicit ridge of 0
/// meets a rank-deficient design.
MinimizeResult minimize_loss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const LossSpec& loss,
                             const SolverConfig& config, const Eigen::VectorXd* warm_start = nullptr);

/// Full-sample sieve M-estimate. Observations outside the basis domain have
/// b_omega = 0, add the constant rho(Y_i) to the objective, and are skipped.
FittedModel fit(const Dataset& data, const SieveBasis& basis, const LossSpec& loss, const SolverConfig& config = {});

/// Rolling-window estimates theta(k) on observations k..k+M-1 for
/// k = 0..n-M. Windows are processed in fixed chunks of 32, each warm-started
/// from its predecessor, so output is independent of the worker count.
/// A deficient window raises SingularDesignError carrying its index.
std::vector<Eigen::VectorXd> fit_blocks(const Dataset& data, const SieveBasis& basis, const LossSpec& loss,
                                        const SolverConfig& config, std::size_t block_length);

}  // namespace sieve
