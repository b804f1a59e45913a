#include "sieve/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sieve/error.hpp"
#include "sieve/format.hpp"
#include "sieve/parallel.hpp"

namespace sieve {

namespace {

constexpr std::size_t kBlockChunk = 32;
constexpr int kMaxHalvings = 60;
constexpr double kArmijo = 1e-4;

/// Value, first and second derivative of the (possibly smoothed) loss.
struct LossPoint {
  double value;
  double deriv;
  double curv;
};

/// Moreau envelope of the check function for quantile; quadratic patch on
/// |r| <= mu for lq with q < 2; exact loss otherwise.
LossPoint smoothed_loss(const LossSpec& loss, double r, double mu) {
  const double p = loss.parameter();
  switch (loss.family()) {
    case LossFamily::quantile: {
      if (mu <= 0.0) return {rho(loss, r), psi(loss, r), 0.0};
      if (r > p * mu) return {p * r - 0.5 * p * p * mu, p, 0.0};
      if (r < -(1.0 - p) * mu) return {(p - 1.0) * r - 0.5 * (1.0 - p) * (1.0 - p) * mu, p - 1.0, 0.0};
      return {0.5 * r * r / mu, r / mu, 1.0 / mu};
    }
    case LossFamily::lq: {
      if (p == 2.0) return {r * r, 2.0 * r, 2.0};
      const double a = std::abs(r);
      if (mu > 0.0 && a <= mu) {
        const double c = p * std::pow(mu, p - 2.0);
        return {0.5 * c * r * r + std::pow(mu, p) * (1.0 - 0.5 * p), c * r, c};
      }
      if (a == 0.0) return {0.0, 0.0, 0.0};
      const double pow_q1 = std::pow(a, p - 1.0);
      return {pow_q1 * a, (r > 0.0 ? p : -p) * pow_q1, p * (p - 1.0) * pow_q1 / a};
    }
    case LossFamily::huber: {
      const double a = std::abs(r);
      if (a <= p) return {0.5 * r * r, r, 1.0};
      return {p * a - 0.5 * p * p, r > 0.0 ? p : -p, 0.0};
    }
    case LossFamily::expectile: {
      const double w = r < 0.0 ? 1.0 - p : p;
      return {w * r * r, 2.0 * w * r, 2.0 * w};
    }
    case LossFamily::least_squares: return {0.5 * r * r, r, 1.0};
  }
  return {0.0, 0.0, 0.0};
}

/// Largest curvature the smoothed loss can take; scales the damping term.
double curvature_reference(const LossSpec& loss, double mu) {
  const double p = loss.parameter();
  switch (loss.family()) {
    case LossFamily::quantile: return mu > 0.0 ? 1.0 / mu : 1.0;
    case LossFamily::lq: return p == 2.0 ? 2.0 : (mu > 0.0 ? p * std::pow(mu, p - 2.0) : 1.0);
    case LossFamily::huber: return 1.0;
    case LossFamily::expectile: return 2.0 * std::max(p, 1.0 - p);
    case LossFamily::least_squares: return 1.0;
  }
  return 1.0;
}

double response_scale(const Eigen::VectorXd& y) {
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  return sd > 0.0 ? sd : std::max(1.0, std::abs(mean));
}

std::vector<double> default_schedule(const LossSpec& loss) {
  if (loss.is_kinked()) return {1e-1, 1e-3, 1e-5, 1e-8};
  return {0.0};
}

/// Smallest singular value when it is negligible relative to the largest.
std::optional<double> rank_deficiency(const Eigen::MatrixXd& design) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (!(smin > 1e-12 * smax)) return smin;
  return std::nullopt;
}


/// Outcome of the exact finish for the check loss.
struct VertexResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  double subgradient_norm = 0.0;
  bool optimal = false;
  std::size_t pivots = 0;
};

double check_objective(const Eigen::VectorXd& r, double tau) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) f += r(i) > 0.0 ? tau * r(i) : (tau - 1.0) * r(i);
  return f;
}

/// Up to K rows, in increasing |r| order, that are linearly independent.
std::vector<Eigen::Index> interpolation_set(const Eigen::MatrixXd& design, const Eigen::VectorXd& r) {
  const Eigen::Index k = design.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  Eigen::MatrixXd q(k, k);
  std::vector<Eigen::Index> chosen;
  for (const auto i : order) {
    Eigen::VectorXd v = design.row(i).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < chosen.size(); ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        v -= q.col(cc).dot(v) * q.col(cc);
      }
    }
    const double norm = v.norm();
    if (norm <= 1e-8 * norm0) continue;
    q.col(static_cast<Eigen::Index>(chosen.size())) = v / norm;
    chosen.push_back(i);
    if (static_cast<Eigen::Index>(chosen.size()) == k) break;
  }
  return chosen;
}

/// Exact minimizer of sum rho_tau(y - B theta) by descent over interpolation
/// vertices (a simplex method on the linear program), started from the
/// vertex nearest to `start`. Returns the best vertex found; `optimal` is set
/// when the subgradient certifies optimality.
std::optional<VertexResult> check_loss_vertex(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double tau,
                                              const Eigen::VectorXd& start, std::size_t max_pivots) {
  const Eigen::Index rows = design.rows();
  const Eigen::Index k = design.cols();
  const Eigen::VectorXd r0 = y - design * start;
  auto set = interpolation_set(design, r0);
  if (static_cast<Eigen::Index>(set.size()) != k) return std::nullopt;

  VertexResult out;
  std::vector<char> in_set(static_cast<std::size_t>(rows), 0);
  Eigen::MatrixXd sub(k, k);
  Eigen::VectorXd ys(k), r(rows), a(k), u(k), c(rows);
  std::vector<std::pair<double, Eigen::Index>> breaks;
  for (;;) {
    std::fill(in_set.begin(), in_set.end(), 0);
    for (Eigen::Index s = 0; s < k; ++s) {
      sub.row(s) = design.row(set[static_cast<std::size_t>(s)]);
      ys(s) = y(set[static_cast<std::size_t>(s)]);
      in_set[static_cast<std::size_t>(set[static_cast<std::size_t>(s)])] = 1;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sub);
    out.theta = lu.solve(ys);
    r.noalias() = y - design * out.theta;
    for (Eigen::Index s = 0; s < k; ++s) r(set[static_cast<std::size_t>(s)]) = 0.0;
    out.objective = check_objective(r, tau);

    a.setZero();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) continue;
      a += (r(i) > 0.0 ? tau : tau - 1.0) * design.row(i).transpose();
    }
    // Multipliers of the interpolated rows: optimal iff u in [-tau, 1 - tau].
    u = lu.transpose().solve(a);
    Eigen::Index leave = -1;
    double worst = 1e-12;
    double sigma = 0.0;
    for (Eigen::Index s = 0; s < k; ++s) {
      const double excess_up = u(s) - (1.0 - tau);
      const double excess_down = -tau - u(s);
      if (excess_up > worst) {
        worst = excess_up;
        leave = s;
        sigma = 1.0;
      }
      if (excess_down > worst) {
        worst = excess_down;
        leave = s;
        sigma = -1.0;
      }
    }
    Eigen::VectorXd clipped = (-u).cwiseMax(tau - 1.0).cwiseMin(tau);
    out.subgradient_norm = (a + sub.transpose() * clipped).norm();
    if (leave < 0) {
      out.optimal = true;
      return out;
    }
    if (out.pivots >= max_pivots) return out;

    // Release row `leave` along d with b_leave^T d = sigma; the objective is
    // piecewise linear in the step, minimized at a weighted-median breakpoint.
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
    e(leave) = sigma;
    const Eigen::VectorXd d = lu.solve(e);
    c.noalias() = design * d;
    double slope = sigma > 0.0 ? -u(leave) + (1.0 - tau) : u(leave) + tau;
    breaks.clear();
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (in_set[static_cast<std::size_t>(i)] || c(i) == 0.0) continue;
      const double t = r(i) / c(i);
      if (t > 0.0) {
        breaks.emplace_back(t, i);
      } else if (r(i) == 0.0 && c(i) < 0.0) {
        // A zero residual was counted with psi = tau - 1 but moves upward.
        slope -= c(i);
      }
    }
    if (breaks.empty()) return out;
    std::sort(breaks.begin(), breaks.end());
    Eigen::Index enter = breaks.back().second;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(c(i));
      if (slope >= 0.0) {
        enter = i;
        break;
      }
    }
    set[static_cast<std::size_t>(leave)] = enter;
    ++out.pivots;
  }
}
}  // namespace

void SolverConfig::validate() const {
  if (max_iterations == 0) throw ConfigError("solver max_iterations must be positive", "solver.max_iterations");
  if (!(gradient_tolerance > 0.0)) throw ConfigError("solver gradient_tolerance must be positive", "solver.gradient_tolerance");
  if (!(objective_tolerance > 0.0)) throw ConfigError("solver objective_tolerance must be positive", "solver.objective_tolerance");
  if (ridge && !(*ridge >= 0.0)) throw ConfigError("solver ridge must be nonnegative", "solver.ridge");
  for (std::size_t i = 0; i < smoothing_schedule.size(); ++i) {
    if (!(smoothing_schedule[i] >= 0.0)) throw ConfigError("smoothing levels must be nonnegative", "solver.smoothing_schedule");
    if (i > 0 && !(smoothing_schedule[i] < smoothing_schedule[i - 1])) {
      throw ConfigError("smoothing schedule must be strictly decreasing", "solver.smoothing_schedule");
    }
  }
  if (!smoothing_schedule.empty() && smoothing_schedule.back() > 1e-8) {
    throw ConfigError("final smoothing level must be at most 1e-8 of the response scale", "solver.smoothing_schedule");
  }
}

MinimizeResult minimize_loss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const LossSpec& loss,
                             const SolverConfig& config, const Eigen::VectorXd* warm_start) {
  config.validate();
  const Eigen::Index rows = design.rows();
  const Eigen::Index k = design.cols();
  if (rows == 0) throw EmptyDesignError("no observations inside the estimation domain");
  if (rows < k) {
    throw SingularDesignError("design has " + std::to_string(rows) + " in-domain rows but " + std::to_string(k) +
                                  " basis functions",
                              0.0);
  }

  const Eigen::VectorXd column_sq = design.colwise().squaredNorm().transpose();
  const double trace_gram = column_sq.sum();
  const double ridge = config.ridge ? *config.ridge : 1e-10 * trace_gram / static_cast<double>(k);
  if (ridge == 0.0) {
    if (auto smin = rank_deficiency(design)) {
      throw SingularDesignError("rank-deficient design: smallest singular value " + format_double(*smin), *smin);
    }
  }
  const Eigen::VectorXd damping_diag = column_sq.cwiseMax(1e-12 * std::max(trace_gram / static_cast<double>(k), 1e-300));

  const double scale = response_scale(y);
  double psi_scale = 0.0;
  {
    const double mean = y.mean();
    for (Eigen::Index i = 0; i < rows; ++i) psi_scale += std::abs(psi(loss, y(i) - mean));
    psi_scale /= static_cast<double>(rows);
    if (!(psi_scale > 0.0)) psi_scale = 1.0;
  }

  MinimizeResult result;
  result.ridge = ridge;
  Eigen::MatrixXd hessian(k, k);
  Eigen::VectorXd theta;
  if (warm_start && warm_start->size() == k) {
    theta = *warm_start;
  } else {
    hessian.noalias() = design.transpose() * design;
    hessian.diagonal().array() += std::max(ridge, 1e-14 * trace_gram / static_cast<double>(k));
    theta = hessian.ldlt().solve(design.transpose() * y);
  }

  const auto schedule = config.smoothing_schedule.empty() ? default_schedule(loss) : config.smoothing_schedule;
  Eigen::VectorXd r = y - design * theta;
  Eigen::VectorXd grad(k), step(k), weights(rows), derivs(rows), design_step(rows);
  double gnorm = std::numeric_limits<double>::infinity();

  auto evaluate = [&](double mu) {
    double f = 0.5 * ridge * theta.squaredNorm();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto lp = smoothed_loss(loss, r(i), mu);
      f += lp.value;
      derivs(i) = lp.deriv;
      weights(i) = lp.curv;
    }
    grad.noalias() = -design.transpose() * derivs;
    grad += ridge * theta;
    gnorm = grad.norm() / (static_cast<double>(rows) * psi_scale);
    return f;
  };

  // The check loss finishes exactly at an interpolation vertex; an explicit
  // positive ridge changes the problem, so the smoothed path is kept then.
  const bool vertex_finish =
      loss.family() == LossFamily::quantile && (!config.ridge || *config.ridge == 0.0) && rows >= k;
  const std::size_t max_pivots = 4 * static_cast<std::size_t>(rows + k);
  bool exact = false;

  for (std::size_t level = 0; level < schedule.size() && !exact; ++level) {
    const double mu = loss.is_kinked() ? schedule[level] * scale : 0.0;
    const double cref = curvature_reference(loss, mu);
    double lambda = 0.0;
    double f = evaluate(mu);
    for (std::size_t it = 0; it < config.max_iterations; ++it) {
      if (gnorm <= config.gradient_tolerance * (1.0 + theta.norm())) break;
      hessian.noalias() = design.transpose() * weights.asDiagonal() * design;
      hessian.diagonal().array() += ridge;

      bool accepted = false;
      double t = 1.0;
      double f_new = f;
      while (!accepted) {
        Eigen::MatrixXd damped = hessian;
        if (lambda > 0.0) damped.diagonal() += lambda * cref * damping_diag;
        Eigen::LLT<Eigen::MatrixXd> llt(damped);
        if (llt.info() != Eigen::Success) {
          lambda = lambda == 0.0 ? 1e-10 : lambda * 100.0;
          if (lambda > 1e12) break;
          continue;
        }
        step = -llt.solve(grad);
        const double slope = grad.dot(step);
        if (!(slope < 0.0)) {
          lambda = lambda == 0.0 ? 1e-10 : lambda * 100.0;
          if (lambda > 1e12) break;
          continue;
        }
        design_step.noalias() = design * step;
        t = 1.0;
        for (int h = 0; h < kMaxHalvings; ++h, t *= 0.5) {
          f_new = 0.5 * ridge * (theta + t * step).squaredNorm();
          for (Eigen::Index i = 0; i < rows; ++i) f_new += smoothed_loss(loss, r(i) - t * design_step(i), mu).value;
          if (f_new <= f + kArmijo * t * slope) {
            accepted = true;
            break;
          }
        }
        if (!accepted) {
          lambda = lambda == 0.0 ? 1e-10 : lambda * 10.0;
          if (lambda > 1e12) break;
        }
      }
      if (!accepted) break;

      theta += t * step;
      r -= t * design_step;
      ++result.iterations;
      const double decrease = f - f_new;
      f = evaluate(mu);
      result.trace.push_back({level, f});
      if (t == 1.0) {
        lambda = lambda < 1e-10 ? 0.0 : lambda * 0.1;
        if (decrease <= config.objective_tolerance * std::max(std::abs(f), 1e-300)) break;
      } else {
        lambda = std::max(lambda * 10.0, 1e-10);
      }
    }
    if (vertex_finish) {
      if (auto vertex = check_loss_vertex(design, y, loss.parameter(), theta, max_pivots)) {
        result.iterations += vertex->pivots;
        if (vertex->objective <= check_objective(r, loss.parameter())) {
          theta = vertex->theta;
          r = y - design * theta;
        }
        if (vertex->optimal) {
          exact = true;
          gnorm = vertex->subgradient_norm / (static_cast<double>(rows) * psi_scale);
          result.trace.push_back({schedule.size(), vertex->objective});
        }
      }
    }
  }

  result.gradient_norm = gnorm;
  result.converged = gnorm <= config.gradient_tolerance * (1.0 + theta.norm());
  double objective = 0.0;
  r = y - design * theta;
  for (Eigen::Index i = 0; i < rows; ++i) objective += rho(loss, r(i));
  result.objective = objective;
  result.theta = std::move(theta);
  return result;
}

namespace {

struct InDomainDesign {
  Eigen::MatrixXd design;  // all observations, zero rows outside the domain
  std::vector<char> inside;
};

InDomainDesign build_design(const Dataset& data, const SieveBasis& basis) {
  if (data.d() != basis.d()) {
    throw ConfigError("basis has " + std::to_string(basis.d()) + " coordinates but data has " + std::to_string(data.d()),
                      "k");
  }
  InDomainDesign out;
  out.design = basis.design(data.covariates());
  out.inside.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    out.inside[i] = basis.domain().contains(data.covariates().row(static_cast<Eigen::Index>(i)).transpose()) ? 1 : 0;
  }
  return out;
}

void gather_rows(const InDomainDesign& all, const Eigen::VectorXd& y, std::size_t first, std::size_t count,
                 Eigen::MatrixXd& design, Eigen::VectorXd& response, double& outside_objective, const LossSpec& loss) {
  std::size_t m = 0;
  for (std::size_t i = first; i < first + count; ++i) m += static_cast<std::size_t>(all.inside[i]);
  design.resize(static_cast<Eigen::Index>(m), all.design.cols());
  response.resize(static_cast<Eigen::Index>(m));
  outside_objective = 0.0;
  Eigen::Index row = 0;
  for (std::size_t i = first; i < first + count; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (all.inside[i]) {
      design.row(row) = all.design.row(ii);
      response(row) = y(ii);
      ++row;
    } else {
      outside_objective += rho(loss, y(ii));
    }
  }
}

}  // namespace

FittedModel fit(const Dataset& data, const SieveBasis& basis, const LossSpec& loss, const SolverConfig& config) {
  const auto all = build_design(data, basis);
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  double outside = 0.0;
  gather_rows(all, data.responses(), 0, data.n(), design, response, outside, loss);
  auto res = minimize_loss(design, response, loss, config);
  FittedModel model{std::move(res.theta), basis, loss, 0.0, 0, false, 0.0, 0.0, 0, {}};
  model.objective_value = res.objective + outside;
  model.solver_iterations = res.iterations;
  model.converged = res.converged;
  model.gradient_norm = res.gradient_norm;
  model.ridge = res.ridge;
  model.in_domain_count = static_cast<std::size_t>(response.size());
  model.trace = std::move(res.trace);
  return model;
}

std::vector<Eigen::VectorXd> fit_blocks(const Dataset& data, const SieveBasis& basis, const LossSpec& loss,
                                        const SolverConfig& config, std::size_t block_length) {
  const std::size_t n = data.n();
  if (block_length < 1 || block_length > n) {
    throw ConfigError("block length M must lie in [1, n] (n = " + std::to_string(n) + ")", "M");
  }
  config.validate();
  const auto all = build_design(data, basis);
  const std::size_t windows = n - block_length + 1;
  std::vector<Eigen::VectorXd> thetas(windows);
  const std::size_t chunks = (windows + kBlockChunk - 1) / kBlockChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
    double outside = 0.0;
    const std::size_t first = c * kBlockChunk;
    const std::size_t last = std::min(windows, first + kBlockChunk);
    for (std::size_t w = first; w < last; ++w) {
      gather_rows(all, data.responses(), w, block_length, design, response, outside, loss);
      try {
        const Eigen::VectorXd* warm = w > first ? &thetas[w - 1] : nullptr;
        thetas[w] = minimize_loss(design, response, loss, config, warm).theta;
      } catch (const EmptyDesignError&) {
        throw SingularDesignError("block " + std::to_string(w) + " has no in-domain observations", 0.0,
                                  static_cast<long>(w));
      } catch (const SingularDesignError& e) {
        throw SingularDesignError("block " + std::to_string(w) + ": " + e.what(), e.smallest_singular_value(),
                                  static_cast<long>(w));
      }
    }
  });
  return thetas;
}

}  // namespace sieve
