#include "sieve/inference.hpp"

#include <cmath>

#include "sieve/error.hpp"

namespace sieve {

namespace {

void check_inside(const EvaluationGrid& grid, const Domain& domain) {
  for (Eigen::Index p = 0; p < grid.points().rows(); ++p) {
    if (!domain.contains(grid.points().row(p).transpose())) {
      throw DomainError("evaluation grid point " + std::to_string(p + 1) + " lies outside the estimation domain");
    }
  }
}

Eigen::VectorXd grid_scaling(const FittedModel& fitted, const BootstrapResult& boot, const EvaluationGrid& grid) {
  return scaling_on_grid(boot.scaling, fitted.basis, boot.sigma_z ? &*boot.sigma_z : nullptr, grid);
}

}  // namespace

bool ScrResult::covers(const Eigen::VectorXd& values) const {
  if (values.size() != center.size()) throw ConfigError("value count does not match the grid", "grid");
  return ((values - center).cwiseAbs().array() <= half_width.array()).all();
}

ScrResult build_scr(const FittedModel& fitted, const BootstrapResult& boot, const EvaluationGrid& grid, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie strictly between 0 and 1", "alpha");
  check_inside(grid, fitted.domain());
  if (boot.n == 0) throw ConfigError("bootstrap result has no sample size", "n");
  ScrResult scr{grid, fitted.predict_points(grid.points()), Eigen::VectorXd(), alpha, boot.critical_value(alpha),
                boot.scaling, boot.n};
  scr.half_width = grid_scaling(fitted, boot, grid) * (scr.critical_value / std::sqrt(static_cast<double>(boot.n)));
  return scr;
}

ScrTestResult scr_test(const FittedModel& fitted, const BootstrapResult& boot, const EvaluationGrid& grid,
                       const Eigen::VectorXd& null_values, const std::vector<double>& alphas,
                       std::string null_description) {
  if (boot.sup_stats.empty()) throw ConfigError("scr_test needs the bootstrap statistics", "B");
  if (null_values.size() != static_cast<Eigen::Index>(grid.size())) {
    throw ConfigError("null function must have one value per grid point", "null");
  }
  if (!null_values.allFinite()) throw DataError("null function values must be finite");
  check_inside(grid, fitted.domain());
  const Eigen::VectorXd h = grid_scaling(fitted, boot, grid);
  const Eigen::VectorXd center = fitted.predict_points(grid.points());
  ScrTestResult out;
  out.null_description = std::move(null_description);
  out.statistic = std::sqrt(static_cast<double>(boot.n)) * ((center - null_values).cwiseAbs().array() / h.array()).maxCoeff();
  std::size_t exceed = 0;
  for (double s : boot.sup_stats) exceed += s >= out.statistic ? 1 : 0;
  out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(boot.sup_stats.size() + 1);
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie strictly between 0 and 1", "alpha");
    out.reject_at.emplace_back(a, out.p_value <= a);
  }
  return out;
}

ScrTestResult redundancy_test(const FittedModel& full, const FittedModel& reduced,
                              std::span<const std::size_t> kept, const BootstrapResult& boot,
                              const EvaluationGrid& grid, const std::vector<double>& alphas) {
  if (kept.size() != reduced.basis.d()) {
    throw ConfigError("reduced model uses " + std::to_string(reduced.basis.d()) + " covariates but " +
                          std::to_string(kept.size()) + " were listed",
                      "reduced");
  }
  for (std::size_t j = 0; j < kept.size(); ++j) {
    if (kept[j] >= full.basis.d() || (j > 0 && kept[j] <= kept[j - 1])) {
      throw ConfigError("kept covariates must be increasing indices into the full model", "reduced");
    }
  }
  Eigen::MatrixXd sub(grid.points().rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    sub.col(static_cast<Eigen::Index>(j)) = grid.points().col(static_cast<Eigen::Index>(kept[j]));
  }
  const Eigen::VectorXd null_values = reduced.predict_points(sub);
  std::string description = "reduced model on covariates";
  for (auto j : kept) description += " x" + std::to_string(j + 1);
  return scr_test(full, boot, grid, null_values, alphas, description);
}

Eigen::VectorXd LinearFit::predict(const Eigen::MatrixXd& points) const {
  return (points * slope).array() + intercept;
}

LinearFit fit_linear(const Dataset& data, const LossSpec& loss, const Domain& domain, const SolverConfig& solver) {
  if (domain.d() != data.d()) throw ConfigError("domain dimension does not match the data", "domain");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.covariates().rows(); ++i) {
    if (domain.contains(data.covariates().row(i).transpose())) rows.push_back(i);
  }
  const auto d = static_cast<Eigen::Index>(data.d());
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), d + 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    design(rr, 0) = 1.0;
    design.block(rr, 1, 1, d) = data.covariates().row(rows[r]);
    y(rr) = data.responses()(rows[r]);
  }
  const auto res = minimize_loss(design, y, loss, solver);
  return {res.theta(0), res.theta.tail(d)};
}

}  // namespace sieve
