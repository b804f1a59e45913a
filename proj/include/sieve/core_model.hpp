#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sieve {

/// Ordered observations (X_i, Y_i), i = 1..n, in temporal order.
///
/// Covariates are stored as an n x d matrix, one row per observation. The
/// constructor rejects empty, mismatched, or non-finite input so every
/// instance satisfies the invariants for its lifetime.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd covariates, Eigen::VectorXd responses);

  std::size_t n() const noexcept { return static_cast<std::size_t>(responses_.size()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }

  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const Eigen::VectorXd& responses() const noexcept { return responses_; }

  /// Contiguous block of `count` observations starting at 0-based `first`.
  Dataset window(std::size_t first, std::size_t count) const;
  /// Same observations keeping only the listed covariate columns (0-based).
  Dataset select_covariates(std::span<const std::size_t> columns) const;
  /// Same covariates with responses shifted by `delta`.
  Dataset shifted(double delta) const;

 private:
  Eigen::MatrixXd covariates_;
  Eigen::VectorXd responses_;
};

/// Axis-aligned box [lower, upper]; the estimation domain D_n.
class Domain {
 public:
  Domain(Eigen::VectorXd lower, Eigen::VectorXd upper);

  std::size_t d() const noexcept { return static_cast<std::size_t>(lower_.size()); }
  const Eigen::VectorXd& lower() const noexcept { return lower_; }
  const Eigen::VectorXd& upper() const noexcept { return upper_; }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    for (Eigen::Index j = 0; j < lower_.size(); ++j) {
      if (!(x(j) >= lower_(j) && x(j) <= upper_(j))) return false;
    }
    return true;
  }

  /// Projection onto a subset of coordinates.
  Domain select(std::span<const std::size_t> coordinates) const;

  bool operator==(const Domain& other) const {
    return lower_ == other.lower_ && upper_ == other.upper_;
  }

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

/// Cartesian product of equally spaced per-coordinate sequences spanning a
/// domain. Point ordering puts coordinate 1 outermost, matching the Kronecker
/// ordering of tensor bases.
class EvaluationGrid {
 public:
  EvaluationGrid(const Domain& domain, std::vector<std::size_t> per_dim_counts);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  const Eigen::MatrixXd& points() const noexcept { return points_; }
  const std::vector<std::size_t>& per_dim_counts() const noexcept { return counts_; }
  const Domain& domain() const noexcept { return domain_; }

  /// Nested refinement: each count c becomes factor*(c-1)+1, so every point of
  /// this grid is also a point of the refined grid.
  EvaluationGrid refined(std::size_t factor) const;

 private:
  Domain domain_;
  std::vector<std::size_t> counts_;
  Eigen::MatrixXd points_;
};

/// Default grid density: 201 points for d = 1, 41 per coordinate otherwise.
std::vector<std::size_t> default_grid_counts(std::size_t d);

/// Column names identifying covariates and response in a dataset file.
struct DatasetSchema {
  std::vector<std::string> x_columns;
  std::string y_column = "y";
};

/// Reads a comma-separated file with a header row. With an empty
/// `schema.x_columns`, every column named x1, x2, ... is used in index order.
Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema = {});

/// Writes columns x1..xd,y using shortest round-trip formatting.
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Componentwise nearest-rank quantiles at trim and 1 - trim.
Domain default_domain(const Dataset& data, double trim = 0.02);

/// Y_i = log(S_{i+1}) - log(S_i); requires positive prices.
std::vector<double> log_returns(std::span<const double> prices);

/// Autoregressive design: X_i = (Y_{i-1}, ..., Y_{i-lags}), response Y_i.
Dataset lagged_dataset(std::span<const double> series, std::size_t lags);

/// Nearest-rank (type 1) empirical quantile of unsorted values, p in [0, 1].
double nearest_rank_quantile(std::vector<double> values, double p);

/// 1-based rank used by the nearest-rank rule: max(1, ceil(p * n)).
std::size_t nearest_rank_index(std::size_t n, double p);

}  // namespace sieve
