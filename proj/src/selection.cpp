#include "sieve/selection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "sieve/error.hpp"
#include "sieve/format.hpp"
#include "sieve/parallel.hpp"

namespace sieve {

std::size_t validation_length(std::size_t n) {
  if (n < 2) return 0;
  return static_cast<std::size_t>(std::floor(3.0 * std::log2(static_cast<double>(n))));
}

DimCandidateSet tensor_candidates(const std::vector<std::size_t>& per_dim, std::size_t d, std::size_t n) {
  DimCandidateSet set;
  set.validation_length = validation_length(n);
  if (per_dim.empty() || d == 0) return set;
  const std::size_t limit = n > set.validation_length ? n - set.validation_length : 0;
  std::vector<std::size_t> idx(d, 0);
  for (;;) {
    std::vector<std::size_t> counts(d);
    std::size_t dim = 1;
    for (std::size_t j = 0; j < d; ++j) {
      counts[j] = per_dim[idx[j]];
      dim *= counts[j];
    }
    if (dim <= limit) set.candidates.push_back(std::move(counts));
    std::size_t j = d;
    while (j > 0) {
      --j;
      if (++idx[j] < per_dim.size()) break;
      idx[j] = 0;
      if (j == 0) return set;
    }
  }
}

DimSelection select_sieve_dim(const Dataset& data, const std::vector<BasisFamily>& families, const Domain& domain,
                              const DimCandidateSet& candidates, const LossSpec& loss, const SolverConfig& solver) {
  if (candidates.candidates.empty()) throw ConfigError("no sieve dimension candidates", "k");
  const std::size_t n = data.n();
  const std::size_t l = candidates.validation_length;
  if (l < 1 || n <= l) throw ConfigError("validation length must lie in [1, n)", "k");
  const Dataset train = data.window(0, n - l);
  const Dataset valid = data.window(n - l, l);

  DimSelection out;
  out.risks.resize(candidates.candidates.size());
  parallel_for(candidates.candidates.size(), [&](std::size_t c) {
    auto& entry = out.risks[c];
    entry.counts = candidates.candidates[c];
    entry.dim = std::accumulate(entry.counts.begin(), entry.counts.end(), std::size_t{1}, std::multiplies<>());
    try {
      if (entry.dim > n - l) throw ConfigError("dimension exceeds the training length", "k");
      const SieveBasis basis(families, entry.counts, domain);
      const auto model = fit(train, basis, loss, solver);
      double risk = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        risk += rho(loss, valid.responses()(jj) - model.predict(valid.covariates().row(jj).transpose()));
      }
      entry.risk = risk / static_cast<double>(l);
    } catch (const Error& e) {
      entry.error = e.what();
    }
  });

  const CandidateRisk* best = nullptr;
  for (const auto& entry : out.risks) {
    if (!entry.risk) continue;
    if (!best) {
      best = &entry;
      continue;
    }
    const double tol = 1e-12 * std::max(std::abs(*best->risk), 1e-300);
    if (*entry.risk < *best->risk - tol) {
      best = &entry;
    } else if (std::abs(*entry.risk - *best->risk) <= tol) {
      if (entry.dim < best->dim || (entry.dim == best->dim && entry.counts < best->counts)) best = &entry;
    }
  }
  if (!best) {
    std::string msg = "every sieve dimension candidate failed:";
    for (const auto& entry : out.risks) {
      msg += " [";
      for (std::size_t j = 0; j < entry.counts.size(); ++j) msg += (j ? "," : "") + std::to_string(entry.counts[j]);
      msg += "] " + entry.error + ";";
    }
    throw NumericError(msg);
  }
  out.chosen = best->counts;
  return out;
}

double flat_top_lambda(double t) {
  const double a = std::abs(t);
  if (a > 0.0 && a <= 0.5) return 1.0;
  if (a > 0.5 && a <= 1.0) return 2.0 * (1.0 - a);
  return 0.0;
}

double autocovariance_hat(std::span<const double> scores, long k) {
  const std::size_t n = scores.size();
  const auto lag = static_cast<std::size_t>(std::labs(k));
  if (n == 0 || lag >= n) throw ConfigError("autocovariance lag must satisfy |k| < n", "lag");
  double mean = 0.0;
  for (double z : scores) mean += z;
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) acc += (scores[i] - mean) * (scores[i + lag] - mean);
  return acc / static_cast<double>(n);
}

double block_size_from_scores(double G, double D, std::size_t n) {
  return std::cbrt(2.0 * G * G / D) * std::cbrt(static_cast<double>(n));
}

BlockSelectionDiagnostics select_block_size_from_scores(const Eigen::MatrixXd& scores, double c) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (n < 20) throw ConfigError("block length selection needs n >= 20", "M");
  if (!(c > 0.0)) throw ConfigError("threshold constant c must be positive", "c");
  const double logn = std::log(static_cast<double>(n));
  BlockSelectionDiagnostics out;
  out.threshold = c * std::sqrt(logn / static_cast<double>(n));
  out.lag_run = static_cast<std::size_t>(std::ceil(std::max(5.0, std::sqrt(logn))));
  const std::size_t m_cap = n / 4;
  out.per_coordinate.resize(static_cast<std::size_t>(scores.cols()));

  parallel_for(out.per_coordinate.size(), [&](std::size_t j) {
    auto& diag = out.per_coordinate[j];
    diag.coordinate = j;
    const Eigen::VectorXd col = scores.col(static_cast<Eigen::Index>(j));
    const std::span<const double> z(col.data(), n);
    const double r0 = autocovariance_hat(z, 0);
    if (!(r0 > 0.0)) {
      diag.skipped = true;
      return;
    }
    // Autocorrelations up to the largest lag the search can touch.
    const std::size_t max_lag = std::min(n - 1, m_cap + out.lag_run);
    std::vector<double> rho(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) rho[k] = autocovariance_hat(z, static_cast<long>(k)) / r0;
    std::size_t m_bar = 0;
    for (std::size_t m = 1; m <= m_cap && m + out.lag_run <= max_lag; ++m) {
      bool small = true;
      for (std::size_t k = 1; k <= out.lag_run && small; ++k) small = std::abs(rho[m + k]) < out.threshold;
      if (small) {
        m_bar = m;
        break;
      }
    }
    if (m_bar == 0) {
      m_bar = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n)))));
      diag.fallback = true;
    }
    diag.m_bar = m_bar;
    diag.M_bar = 2 * m_bar;
    const auto big = static_cast<long>(diag.M_bar);
    double g = 0.0, s = 0.0;
    for (long k = -big; k <= big; ++k) {
      if (static_cast<std::size_t>(std::labs(k)) >= n) continue;
      const double lam = flat_top_lambda(static_cast<double>(k) / static_cast<double>(big));
      if (lam == 0.0) continue;
      const double r = autocovariance_hat(z, k);
      g += lam * std::abs(static_cast<double>(k)) * r;
      s += lam * r;
    }
    diag.G = g;
    diag.D = 4.0 / 3.0 * s * s;
    if (!(diag.D > 0.0)) {
      diag.skipped = true;
      return;
    }
    diag.M_hat = block_size_from_scores(diag.G, diag.D, n);
  });

  double total = 0.0;
  std::size_t used = 0;
  for (const auto& diag : out.per_coordinate) {
    if (diag.skipped) {
      out.warnings.push_back("coordinate " + std::to_string(diag.coordinate + 1) +
                             " skipped: degenerate scores (zero variance or zero long-run sum)");
      continue;
    }
    if (diag.fallback) {
      out.warnings.push_back("coordinate " + std::to_string(diag.coordinate + 1) +
                             ": no lag passed the correlogram threshold, using floor(n^(1/3))");
    }
    total += diag.M_hat;
    ++used;
  }
  if (used == 0) throw NumericError("block length selection failed: every score coordinate is degenerate");
  out.M_mean = total / static_cast<double>(used);
  const auto rounded = static_cast<std::size_t>(std::floor(out.M_mean + 0.5));
  out.M_hat = std::clamp<std::size_t>(rounded, 2, std::max<std::size_t>(2, n / 4));
  return out;
}

Eigen::MatrixXd score_matrix(const Dataset& data, const FittedModel& fitted) {
  const Eigen::MatrixXd design = fitted.basis.design(data.covariates());
  const Eigen::VectorXd resid = data.responses() - design * fitted.theta;
  Eigen::MatrixXd z(design.rows(), design.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i) = psi(fitted.loss, resid(i)) * design.row(i);
  return z;
}

BlockSelectionDiagnostics select_block_size(const Dataset& data, const FittedModel& fitted, double c) {
  return select_block_size_from_scores(score_matrix(data, fitted), c);
}

}  // namespace sieve
