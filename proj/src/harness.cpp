#include "sieve/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sieve/error.hpp"
#include "sieve/inference.hpp"
#include "sieve/parallel.hpp"
#include "sieve/selection.hpp"

namespace sieve {

namespace {

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

constexpr std::uint64_t kBootstrapStreamBase = std::uint64_t{1} << 40;

}  // namespace

void ExperimentSpec::validate() const {
  if (n < 20) throw ConfigError("experiment needs n >= 20", "n");
  if (replications < 1) throw ConfigError("replications must be at least 1", "replications");
  if (B < 1) throw ConfigError("bootstrap size B must be at least 1", "B");
  if (losses.empty()) throw ConfigError("at least one loss is required", "losses");
  if (alphas.empty()) throw ConfigError("at least one alpha level is required", "alpha");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie strictly between 0 and 1", "alpha");
  }
  if (grid.size() != 2) throw ConfigError("the simulation model has two covariates; grid needs two counts", "grid");
  for (auto c : grid) {
    if (c < 1) throw ConfigError("grid counts must be positive", "grid");
  }
  if (!(trim >= 0.0 && trim < 0.5)) throw ConfigError("trim must lie in [0, 0.5)", "trim");
  if (domain && domain->d() != 2) throw ConfigError("the simulation model has two covariates; domain needs two bounds", "domain");
  if (k) {
    if (k->size() != 2) throw ConfigError("k needs one count per covariate", "k");
    for (auto c : *k) family.validate_count(c);
  }
  for (auto c : k_candidates) family.validate_count(c);
  if (M && (*M < 1 || *M > n)) throw ConfigError("block length M must lie in [1, n]", "M");
  if (!(block_floor >= 0.0)) throw ConfigError("block_floor must be nonnegative", "block_floor");
  solver.validate();
}

std::vector<std::size_t> default_k_candidates(const BasisFamily& family) {
  switch (family.kind()) {
    case BasisFamily::Kind::trigonometric: return {3, 5, 7};
    case BasisFamily::Kind::legendre: return {2, 3, 4, 5, 6};
    case BasisFamily::Kind::daubechies: return {2, 4, 8};
  }
  return {3};
}

std::size_t effective_block_length(std::size_t M_hat, std::size_t K, std::size_t n, double floor) {
  const auto lower = static_cast<std::size_t>(std::ceil(floor * static_cast<double>(K)));
  return std::min(std::max(M_hat, lower), std::max<std::size_t>(1, n / 2));
}

double sim_error_sd(const SimModelSpec& model) { return model.noise_scale / std::sqrt(1.0 - model.ar * model.ar); }

double gaussian_loss_shift(const LossSpec& loss, double sd) {
  if (!(sd > 0.0)) return 0.0;
  const double tau = loss.parameter();
  switch (loss.family()) {
    case LossFamily::quantile: return sd * normal_quantile(tau);
    case LossFamily::expectile: {
      // tau E(eps - c)^+ = (1 - tau) E(c - eps)^+, normal partial moments.
      auto gap = [&](double c) {
        const double z = c / sd;
        const double upper = sd * normal_pdf(z) - c * (1.0 - normal_cdf(z));
        const double lower = upper + c;  // E(c - eps)^+ = E(eps - c)^+ + c
        return tau * upper - (1.0 - tau) * lower;
      };
      double lo = -20.0 * sd, hi = 20.0 * sd;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    case LossFamily::huber:
    case LossFamily::lq:
    case LossFamily::least_squares: return 0.0;
  }
  return 0.0;
}

ReplicationRecord run_replication(const ExperimentSpec& spec, const Dataset& data, const LossSpec& loss,
                                  std::size_t replication, std::size_t loss_index) {
  const auto start = std::chrono::steady_clock::now();
  ReplicationRecord rec;
  rec.replication = replication;
  rec.loss = loss.to_string();
  const Domain domain = spec.domain ? *spec.domain : default_domain(data, spec.trim);
  const EvaluationGrid grid(domain, spec.grid);
  const std::vector<BasisFamily> families(2, spec.family);

  if (spec.k) {
    rec.k = *spec.k;
  } else {
    const auto& per_dim = spec.k_candidates.empty() ? default_k_candidates(spec.family) : spec.k_candidates;
    rec.k = select_sieve_dim(data, families, domain, tensor_candidates(per_dim, 2, data.n()), loss, spec.solver).chosen;
  }
  const SieveBasis basis(families, rec.k, domain);
  const auto fitted = fit(data, basis, loss, spec.solver);

  if (spec.M) {
    rec.M = *spec.M;
    rec.M_hat = *spec.M;
  } else {
    rec.M_hat = select_block_size(data, fitted).M_hat;
    rec.M = effective_block_length(rec.M_hat, basis.dim(), data.n(), spec.block_floor);
  }

  BootstrapConfig boot_cfg;
  boot_cfg.M = rec.M;
  boot_cfg.B = spec.B;
  boot_cfg.alphas = spec.alphas;
  boot_cfg.scaling = spec.scaling;
  boot_cfg.seed = spec.seed;
  boot_cfg.stream_id = kBootstrapStreamBase + replication * spec.losses.size() + loss_index;
  const auto boot = run_bootstrap(data, fitted, grid, boot_cfg, spec.solver);

  const double shift = gaussian_loss_shift(loss, sim_error_sd(spec.model));
  Eigen::VectorXd truth(static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index p = 0; p < truth.size(); ++p) {
    truth(p) = sim_truth(spec.model.target, grid.points()(p, 0), grid.points()(p, 1)) + shift;
  }
  for (double alpha : spec.alphas) {
    const auto scr = build_scr(fitted, boot, grid, alpha);
    rec.critical_values.emplace_back(alpha, scr.critical_value);
    rec.covered.emplace_back(alpha, scr.covers(truth));
    rec.mean_half_width.emplace_back(alpha, scr.half_width.mean());
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

CoverageTable run_coverage_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t losses = spec.losses.size();
  CoverageTable table;
  table.log.resize(spec.replications * losses);
  parallel_for(spec.replications, [&](std::size_t r) {
    // Data are drawn once per replication and shared across losses.
    const Dataset data = gen_sim_model(spec.model, spec.n, RngStream(spec.seed, r), spec.burn_in);
    for (std::size_t l = 0; l < losses; ++l) {
      auto& slot = table.log[r * losses + l];
      try {
        slot = run_replication(spec, data, spec.losses[l], r, l);
      } catch (const Error& e) {
        slot.replication = r;
        slot.loss = spec.losses[l].to_string();
        slot.error = e.what();
      }
    }
  });

  for (std::size_t l = 0; l < losses; ++l) {
    std::size_t failures = 0;
    for (std::size_t r = 0; r < spec.replications; ++r) failures += table.log[r * losses + l].error.empty() ? 0 : 1;
    if (static_cast<double>(failures) > 0.05 * static_cast<double>(spec.replications)) {
      std::string first;
      for (std::size_t r = 0; r < spec.replications && first.empty(); ++r) first = table.log[r * losses + l].error;
      throw NumericError(std::to_string(failures) + " of " + std::to_string(spec.replications) + " replications failed for " +
                         spec.losses[l].to_string() + " (first: " + first + ")");
    }
    for (std::size_t a = 0; a < spec.alphas.size(); ++a) {
      CoverageRow row;
      row.loss = spec.losses[l].to_string();
      row.alpha = spec.alphas[a];
      row.failures = failures;
      double covered = 0.0, width = 0.0, seconds = 0.0;
      for (std::size_t r = 0; r < spec.replications; ++r) {
        const auto& rec = table.log[r * losses + l];
        if (!rec.error.empty()) continue;
        ++row.successes;
        covered += rec.covered[a].second ? 1.0 : 0.0;
        width += rec.mean_half_width[a].second;
        seconds += rec.seconds;
      }
      if (row.successes > 0) {
        const double s = static_cast<double>(row.successes);
        row.coverage = covered / s;
        row.band = 2.0 * std::sqrt(row.coverage * (1.0 - row.coverage) / s);
        row.mean_half_width = width / s;
        row.mean_seconds = seconds / s;
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace sieve
