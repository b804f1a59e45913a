#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sieve/basis.hpp"
#include "sieve/core_model.hpp"
#include "sieve/fitted_model.hpp"
#include "sieve/loss.hpp"
#include "sieve/solver.hpp"

namespace sieve {

/// Terminal validation window length floor(3 log2 n).
std::size_t validation_length(std::size_t n);

struct DimCandidateSet {
  std::vector<std::vector<std::size_t>> candidates;
  std::size_t validation_length = 0;
};

struct CandidateRisk {
  std::vector<std::size_t> counts;
  std::size_t dim = 0;
  /// Mean validation loss; unset when the candidate failed to fit.
  std::optional<double> risk;
  std::string error;
};

struct DimSelection {
  std::vector<std::size_t> chosen;
  std::vector<CandidateRisk> risks;
};

/// Every admissible count tuple with per-coordinate counts drawn from
/// `per_dim` (same list for each coordinate) and total dimension at most n - l_n.
DimCandidateSet tensor_candidates(const std::vector<std::size_t>& per_dim, std::size_t d, std::size_t n);

/// Fits each candidate on the first n - l_n observations and scores its
/// one-step forecasts Q(X_j) on the last l_n. Ties (within 1e-12 relative)
/// go to the smallest dimension, then the lexicographically smallest tuple.
DimSelection select_sieve_dim(const Dataset& data, const std::vector<BasisFamily>& families, const Domain& domain,
                              const DimCandidateSet& candidates, const LossSpec& loss,
                              const SolverConfig& solver = {});

/// Flat-top lag window: 1 on 0 < |t| <= 1/2, 2 (1 - |t|) on 1/2 < |t| <= 1, else 0.
double flat_top_lambda(double t);

/// R(k) = n^{-1} sum_{i=1}^{n-|k|} (z_i - zbar)(z_{i+|k|} - zbar).
double autocovariance_hat(std::span<const double> scores, long k);

/// (2 G^2 / D)^{1/3} n^{1/3}.
double block_size_from_scores(double G, double D, std::size_t n);

struct CoordinateBlockDiagnostics {
  std::size_t coordinate = 0;
  bool skipped = false;
  /// m_bar came from the n^{1/3} fallback.
  bool fallback = false;
  std::size_t m_bar = 0;
  std::size_t M_bar = 0;
  double G = 0.0;
  double D = 0.0;
  double M_hat = 0.0;
};

struct BlockSelectionDiagnostics {
  std::vector<CoordinateBlockDiagnostics> per_coordinate;
  double M_mean = 0.0;
  std::size_t M_hat = 0;
  std::size_t lag_run = 0;
  double threshold = 0.0;
  std::vector<std::string> warnings;
};

/// Automatic block length from an n x K score matrix (column j holds z_ij).
BlockSelectionDiagnostics select_block_size_from_scores(const Eigen::MatrixXd& scores, double c = 2.0);

/// Scores z_ij = psi(eps_i) b_j(X_i) from a fitted model, then the rule above.
BlockSelectionDiagnostics select_block_size(const Dataset& data, const FittedModel& fitted, double c = 2.0);

/// Matrix of scores psi(Y_i - Q(X_i)) b(X_i), one row per observation.
Eigen::MatrixXd score_matrix(const Dataset& data, const FittedModel& fitted);

}  // namespace sieve
