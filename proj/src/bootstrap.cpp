#include "sieve/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sieve/error.hpp"
#include "sieve/format.hpp"
#include "sieve/parallel.hpp"

namespace sieve {

namespace {

constexpr std::size_t kReplicateChunk = 64;

void check_grid_inside(const EvaluationGrid& grid, const Domain& domain) {
  for (Eigen::Index p = 0; p < grid.points().rows(); ++p) {
    if (!domain.contains(grid.points().row(p).transpose())) {
      throw DomainError("evaluation grid point " + std::to_string(p + 1) + " lies outside the estimation domain");
    }
  }
}

}  // namespace

Scaling parse_scaling(std::string_view text) {
  if (text == "unit") return Scaling::unit;
  if (text == "stddev") return Scaling::stddev;
  throw ConfigError("unknown scaling '" + std::string(text) + "' (expected unit or stddev)", "scaling");
}

std::string_view to_string(Scaling scaling) { return scaling == Scaling::unit ? "unit" : "stddev"; }

void BootstrapConfig::validate(std::size_t n) const {
  if (M < 1 || M > n) throw ConfigError("block length M must lie in [1, n] (n = " + std::to_string(n) + ")", "M");
  if (B < 1) throw ConfigError("bootstrap size B must be at least 1", "B");
  if (alphas.empty()) throw ConfigError("at least one alpha level is required", "alpha");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie strictly between 0 and 1", "alpha");
  }
}

double critical_value_from(std::vector<double> sup_stats, double alpha) {
  if (sup_stats.empty()) throw ConfigError("no bootstrap statistics available", "B");
  const std::size_t rank = nearest_rank_index(sup_stats.size(), 1.0 - alpha);
  std::nth_element(sup_stats.begin(), sup_stats.begin() + static_cast<std::ptrdiff_t>(rank - 1), sup_stats.end());
  return sup_stats[rank - 1];
}

double BootstrapResult::critical_value(double alpha) const {
  for (const auto& [a, c] : critical_values) {
    if (a == alpha) return c;
  }
  if (sup_stats.empty()) {
    throw ConfigError("alpha " + format_double(alpha) + " was not computed and no statistics were retained", "alpha");
  }
  return critical_value_from(sup_stats, alpha);
}

Eigen::VectorXd phi_replicate(const std::vector<Eigen::VectorXd>& block_thetas, const Eigen::VectorXd& theta_hat,
                              std::size_t M, const RngStream& rng, std::uint64_t b, bool zero_multipliers) {
  if (block_thetas.empty()) throw ConfigError("no rolling-window estimates", "M");
  const auto windows = static_cast<double>(block_thetas.size());
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(theta_hat.size());
  RngStream stream = rng.substream(b);
  for (const auto& theta : block_thetas) {
    const double v = stream.normal();
    if (!zero_multipliers) phi += (theta - theta_hat) * v;
  }
  return phi * std::sqrt(static_cast<double>(M) / windows);
}

Eigen::MatrixXd estimate_sigma_z(const Dataset& data, const FittedModel& fitted, std::size_t M) {
  const std::size_t n = data.n();
  if (M < 1 || M > n) throw ConfigError("block length M must lie in [1, n]", "M");
  const auto k = static_cast<Eigen::Index>(fitted.basis.dim());
  const Eigen::MatrixXd design = fitted.basis.design(data.covariates());
  const Eigen::VectorXd resid = data.responses() - design * fitted.theta;
  // Rows z_i = psi(eps_i) b(X_i); design rows already vanish off the domain.
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), k);
  for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) = psi(fitted.loss, resid(i)) * design.row(i);
  const Eigen::RowVectorXd zbar = z.colwise().mean();
  z.rowwise() -= zbar;

  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) + 1, k);
  for (Eigen::Index i = 0; i < z.rows(); ++i) prefix.row(i + 1) = prefix.row(i) + z.row(i);
  const auto windows = static_cast<Eigen::Index>(n - M + 1);
  const auto m = static_cast<Eigen::Index>(M);
  Eigen::MatrixXd w(windows, k);
  for (Eigen::Index j = 0; j < windows; ++j) w.row(j) = prefix.row(j + m) - prefix.row(j);
  Eigen::MatrixXd sigma = w.transpose() * w;
  sigma /= static_cast<double>(M) * static_cast<double>(windows);
  return 0.5 * (sigma + sigma.transpose());
}

double scaling_floor(const Eigen::MatrixXd& sigma_z) {
  const double tr = sigma_z.trace();
  if (!(tr > 0.0)) return 1e-8;
  return 1e-8 * std::sqrt(tr / static_cast<double>(sigma_z.rows()));
}

double scaling_h(Scaling scaling, const SieveBasis& basis, const Eigen::MatrixXd* sigma_z,
                 const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (scaling == Scaling::unit) return 1.0;
  if (!sigma_z) throw ConfigError("stddev scaling requires an estimated Sigma_Z", "scaling");
  if (!basis.domain().contains(x)) throw DomainError("stddev scaling is undefined outside the estimation domain");
  const Eigen::VectorXd b = basis.eval(x);
  const double q = b.dot(*sigma_z * b);
  return std::max(std::sqrt(std::max(q, 0.0)), scaling_floor(*sigma_z));
}

Eigen::VectorXd scaling_on_grid(Scaling scaling, const SieveBasis& basis, const Eigen::MatrixXd* sigma_z,
                                const EvaluationGrid& grid) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index p = 0; p < h.size(); ++p) h(p) = scaling_h(scaling, basis, sigma_z, grid.points().row(p).transpose());
  return h;
}

std::vector<double> bootstrap_sup_stats(const std::vector<Eigen::VectorXd>& block_thetas,
                                        const Eigen::VectorXd& theta_hat, std::size_t M,
                                        const Eigen::MatrixXd& scaled_grid_design, std::size_t B,
                                        const RngStream& rng) {
  if (block_thetas.empty()) throw ConfigError("no rolling-window estimates", "M");
  const auto k = theta_hat.size();
  const auto windows = static_cast<Eigen::Index>(block_thetas.size());
  Eigen::MatrixXd deltas(k, windows);
  for (Eigen::Index j = 0; j < windows; ++j) deltas.col(j) = block_thetas[static_cast<std::size_t>(j)] - theta_hat;
  deltas *= std::sqrt(static_cast<double>(M) / static_cast<double>(windows));

  std::vector<double> sups(B);
  const std::size_t chunks = (B + kReplicateChunk - 1) / kReplicateChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Eigen::VectorXd v(windows), phi(k), values(scaled_grid_design.rows());
    const std::size_t last = std::min(B, (c + 1) * kReplicateChunk);
    for (std::size_t b = c * kReplicateChunk; b < last; ++b) {
      RngStream stream = rng.substream(b);
      for (Eigen::Index j = 0; j < windows; ++j) v(j) = stream.normal();
      phi.noalias() = deltas * v;
      values.noalias() = scaled_grid_design * phi;
      sups[b] = values.cwiseAbs().maxCoeff();
    }
  });
  return sups;
}

BootstrapResult run_bootstrap(const Dataset& data, const FittedModel& fitted, const EvaluationGrid& grid,
                              const BootstrapConfig& config, const SolverConfig& solver) {
  config.validate(data.n());
  check_grid_inside(grid, fitted.domain());
  const auto blocks = fit_blocks(data, fitted.basis, fitted.loss, solver, config.M);
  return run_bootstrap(data, fitted, grid, config, blocks);
}

BootstrapResult run_bootstrap(const Dataset& data, const FittedModel& fitted, const EvaluationGrid& grid,
                              const BootstrapConfig& config, const std::vector<Eigen::VectorXd>& block_thetas) {
  config.validate(data.n());
  check_grid_inside(grid, fitted.domain());
  if (block_thetas.size() != data.n() - config.M + 1) {
    throw ConfigError("expected " + std::to_string(data.n() - config.M + 1) + " rolling-window estimates", "M");
  }
  BootstrapResult result;
  result.scaling = config.scaling;
  result.M = config.M;
  result.n = data.n();
  if (config.scaling == Scaling::stddev || config.compute_sigma_z) {
    result.sigma_z = estimate_sigma_z(data, fitted, config.M);
  }
  const Eigen::VectorXd h =
      scaling_on_grid(config.scaling, fitted.basis, result.sigma_z ? &*result.sigma_z : nullptr, grid);
  Eigen::MatrixXd design = fitted.basis.design(grid.points());
  design.array().colwise() /= h.array();

  const RngStream rng(config.seed, config.stream_id);
  result.sup_stats = bootstrap_sup_stats(block_thetas, fitted.theta, config.M, design, config.B, rng);
  for (double alpha : config.alphas) {
    result.critical_values.emplace_back(alpha, critical_value_from(result.sup_stats, alpha));
    if (static_cast<double>(config.B) < 1.0 / alpha) {
      result.warnings.push_back("B = " + std::to_string(config.B) + " < 1/alpha for alpha = " + format_double(alpha) +
                                ": the critical value is the sample maximum");
    }
  }
  return result;
}

}  // namespace sieve
