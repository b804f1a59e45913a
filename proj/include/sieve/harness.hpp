#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sieve/basis.hpp"
#include "sieve/bootstrap.hpp"
#include "sieve/dgp.hpp"
#include "sieve/loss.hpp"
#include "sieve/solver.hpp"

namespace sieve {

/// Coverage study on the bivariate simulation model.
struct ExperimentSpec {
  SimModelSpec model;
  std::size_t n = 500;
  std::size_t burn_in = 200;
  BasisFamily family = BasisFamily::trigonometric();
  std::vector<LossSpec> losses{LossSpec::least_squares()};
  std::size_t replications = 200;
  std::size_t B = 500;
  std::vector<double> alphas{0.05, 0.10};
  std::uint64_t seed = 1;
  std::vector<std::size_t> grid{41, 41};
  double trim = 0.02;
  /// Fixed estimation domain; unset uses default_domain(data, trim).
  std::optional<Domain> domain;
  Scaling scaling = Scaling::unit;
  /// Fixed per-coordinate counts; unset selects by rolling validation.
  std::optional<std::vector<std::size_t>> k;
  /// Per-coordinate counts tried by the automatic selection; empty uses the
  /// family default.
  std::vector<std::size_t> k_candidates;
  /// Fixed block length; unset uses the automatic rule.
  std::optional<std::size_t> M;
  /// Automatic block lengths are floored at this multiple of K.
  double block_floor = 6.0;
  SolverConfig solver;

  void validate() const;
};

/// Default per-coordinate candidate counts for automatic selection.
std::vector<std::size_t> default_k_candidates(const BasisFamily& family);

/// Block length used when the automatic rule returns M_hat for a basis of
/// dimension K on n observations: max(M_hat, ceil(floor * K)), capped at n / 2.
std::size_t effective_block_length(std::size_t M_hat, std::size_t K, std::size_t n, double floor);

/// Location shift c with E psi(eps - c) = 0 for eps ~ N(0, sd^2): the
/// population target of each loss is Q(x) + c.
double gaussian_loss_shift(const LossSpec& loss, double sd);

/// Standard deviation of the stationary simulation errors.
double sim_error_sd(const SimModelSpec& model);

struct ReplicationRecord {
  std::size_t replication = 0;
  std::string loss;
  std::vector<std::size_t> k;
  std::size_t M = 0;
  std::size_t M_hat = 0;
  std::vector<std::pair<double, double>> critical_values;
  std::vector<std::pair<double, bool>> covered;
  std::vector<std::pair<double, double>> mean_half_width;
  double seconds = 0.0;
  std::string error;
};

struct CoverageRow {
  std::string loss;
  double alpha = 0.0;
  double coverage = 0.0;
  /// 2 sqrt(p (1 - p) / R).
  double band = 0.0;
  double mean_half_width = 0.0;
  double mean_seconds = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
  std::vector<ReplicationRecord> log;
};

/// Runs every replication (concurrently over derived streams) and reduces to
/// one row per (loss, alpha). Failed replications are excluded and counted;
/// more than 5% failures for any loss raises NumericError.
CoverageTable run_coverage_experiment(const ExperimentSpec& spec);

/// One replication for one loss; exposed for testing.
ReplicationRecord run_replication(const ExperimentSpec& spec, const Dataset& data, const LossSpec& loss,
                                  std::size_t replication, std::size_t loss_index);

}  // namespace sieve
