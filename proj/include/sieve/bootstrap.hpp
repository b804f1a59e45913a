#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sieve/core_model.hpp"
#include "sieve/fitted_model.hpp"
#include "sieve/rng.hpp"
#include "sieve/solver.hpp"

namespace sieve {

/// Band shape h(x): constant, or the pointwise standard deviation sqrt(b^T Sigma_Z b).
enum class Scaling { unit, stddev };

Scaling parse_scaling(std::string_view text);
std::string_view to_string(Scaling scaling);

struct BootstrapConfig {
  std::size_t M = 0;
  std::size_t B = 500;
  std::vector<double> alphas{0.05};
  Scaling scaling = Scaling::unit;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  /// Estimate Sigma_Z even under unit scaling.
  bool compute_sigma_z = false;

  /// Throws ConfigError unless 1 <= M <= n, B >= 1 and every alpha is in (0, 1).
  void validate(std::size_t n) const;
};

struct BootstrapResult {
  /// sup over the grid of |b(x)^T Phi_M| / h(x), in replicate order.
  std::vector<double> sup_stats;
  /// (alpha, C_alpha) in the order the levels were requested.
  std::vector<std::pair<double, double>> critical_values;
  std::optional<Eigen::MatrixXd> sigma_z;
  Scaling scaling = Scaling::unit;
  std::size_t M = 0;
  std::size_t n = 0;
  std::vector<std::string> warnings;

  /// Stored level, or the nearest-rank quantile of sup_stats otherwise.
  double critical_value(double alpha) const;
};

/// Nearest-rank (1 - alpha) quantile of the statistics.
double critical_value_from(std::vector<double> sup_stats, double alpha);

/// Phi_M = sqrt(M / (n - M + 1)) sum_j (theta(j) - theta_hat) V_j with V_j
/// standard normal from rng.substream(b). `zero_multipliers` forces V = 0.
Eigen::VectorXd phi_replicate(const std::vector<Eigen::VectorXd>& block_thetas, const Eigen::VectorXd& theta_hat,
                              std::size_t M, const RngStream& rng, std::uint64_t b, bool zero_multipliers = false);

/// Block-sum long-run covariance of z_i = psi(eps_i) b(X_i):
///   W(j) = M^{-1/2} sum_{i=j}^{j+M-1} (z_i - zbar),
///   Sigma_Z = (n - M + 1)^{-1} sum_j W(j) W(j)^T.
Eigen::MatrixXd estimate_sigma_z(const Dataset& data, const FittedModel& fitted, std::size_t M);

/// Floor applied to h under stddev scaling: 1e-8 sqrt(tr Sigma_Z / K), or
/// 1e-8 when Sigma_Z vanishes.
double scaling_floor(const Eigen::MatrixXd& sigma_z);

/// h(x) at one point. Under stddev scaling x must lie in the basis domain.
double scaling_h(Scaling scaling, const SieveBasis& basis, const Eigen::MatrixXd* sigma_z,
                 const Eigen::Ref<const Eigen::VectorXd>& x);

/// h on every grid point.
Eigen::VectorXd scaling_on_grid(Scaling scaling, const SieveBasis& basis, const Eigen::MatrixXd* sigma_z,
                                const EvaluationGrid& grid);

/// Replicates only, given precomputed rolling-window estimates.
std::vector<double> bootstrap_sup_stats(const std::vector<Eigen::VectorXd>& block_thetas,
                                        const Eigen::VectorXd& theta_hat, std::size_t M,
                                        const Eigen::MatrixXd& scaled_grid_design, std::size_t B,
                                        const RngStream& rng);

/// Self-convolved bootstrap: fit every window of length M, draw B Gaussian
/// convolutions of the centered window estimates, and record the sup
/// statistic of each over the grid.
BootstrapResult run_bootstrap(const Dataset& data, const FittedModel& fitted, const EvaluationGrid& grid,
                              const BootstrapConfig& config, const SolverConfig& solver = {});

/// Same, reusing rolling-window estimates from an earlier call to fit_blocks.
BootstrapResult run_bootstrap(const Dataset& data, const FittedModel& fitted, const EvaluationGrid& grid,
                              const BootstrapConfig& config, const std::vector<Eigen::VectorXd>& block_thetas);

}  // namespace sieve
