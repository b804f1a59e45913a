#include "sieve/dgp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "sieve/error.hpp"

namespace sieve {

SimTarget parse_sim_target(std::string_view text) {
  if (text == "Q1" || text == "q1") return SimTarget::q1;
  if (text == "Q2" || text == "q2") return SimTarget::q2;
  throw ConfigError("unknown simulation target '" + std::string(text) + "' (expected Q1 or Q2)", "target");
}

std::string_view to_string(SimTarget target) { return target == SimTarget::q1 ? "Q1" : "Q2"; }

double sim_truth(SimTarget target, double x1, double x2) {
  const double s = std::sin(2.0 * std::numbers::pi * x1);
  return target == SimTarget::q1 ? s + x2 : (s + 1.0) * std::exp(-0.5 * x2);
}

double copula_normal_correlation(double rank_correlation) {
  return 2.0 * std::sin(std::numbers::pi * rank_correlation / 6.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

Eigen::Vector2d draw_copula_uniforms(double normal_correlation, RngStream& rng) {
  const double z1 = rng.normal();
  const double z2 = normal_correlation * z1 + std::sqrt(1.0 - normal_correlation * normal_correlation) * rng.normal();
  return {normal_cdf(z1), normal_cdf(z2)};
}

Dataset gen_sim_model(const SimModelSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in) {
  if (n < 1) throw ConfigError("sample size must be positive", "n");
  if (!(std::abs(spec.uniform_correlation) < 1.0)) throw ConfigError("copula correlation must lie in (-1, 1)", "dgp");
  if (!(std::abs(spec.ar) < 1.0)) throw ConfigError("error autoregression must satisfy |ar| < 1", "dgp");
  if (!(spec.noise_scale >= 0.0)) throw ConfigError("noise scale must be nonnegative", "dgp");
  const double rho = copula_normal_correlation(spec.uniform_correlation);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::Vector2d u_lag1 = draw_copula_uniforms(rho, rng);
  Eigen::Vector2d u_lag2 = draw_copula_uniforms(rho, rng);
  double eps = 0.0;
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    const Eigen::Vector2d u = draw_copula_uniforms(rho, rng);
    const double eta = rng.normal();
    eps = spec.ar * eps + spec.noise_scale * eta;
    const Eigen::Vector2d xt = 0.5 * u + 0.3 * u_lag1 + 0.2 * u_lag2;
    u_lag2 = u_lag1;
    u_lag1 = u;
    if (t < burn_in) continue;
    const auto i = static_cast<Eigen::Index>(t - burn_in);
    x.row(i) = xt.transpose();
    y(i) = sim_truth(spec.target, xt(0), xt(1)) + eps;
  }
  return Dataset(std::move(x), std::move(y));
}

void GarchSpec::validate() const {
  if (!(alpha0 > 0.0)) throw ConfigError("garch alpha0 must be positive", "dgp.alpha0");
  double total = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ConfigError("garch alpha coefficients must be nonnegative", "dgp.alpha");
    total += a;
  }
  for (double b : beta) {
    if (!(b >= 0.0)) throw ConfigError("garch beta coefficients must be nonnegative", "dgp.beta");
    total += b;
  }
  if (!(total < 1.0)) throw ConfigError("garch is not stationary: sum alpha + sum beta must be < 1", "dgp");
}

std::vector<double> gen_garch(const GarchSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in) {
  spec.validate();
  double persistence = 0.0;
  for (double a : spec.alpha) persistence += a;
  for (double b : spec.beta) persistence += b;
  const double stationary_variance = spec.alpha0 / (1.0 - persistence);
  const std::size_t p = spec.alpha.size();
  const std::size_t q = spec.beta.size();
  std::vector<double> ysq(p, stationary_variance);  // y_{t-1}^2, y_{t-2}^2, ...
  std::vector<double> xs(q, stationary_variance);   // x_{t-1}, x_{t-2}, ...
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    double x = spec.alpha0;
    for (std::size_t j = 0; j < p; ++j) x += spec.alpha[j] * ysq[j];
    for (std::size_t i = 0; i < q; ++i) x += spec.beta[i] * xs[i];
    const double y = std::sqrt(x) * rng.normal();
    if (p > 0) {
      for (std::size_t j = p - 1; j > 0; --j) ysq[j] = ysq[j - 1];
      ysq[0] = y * y;
    }
    if (q > 0) {
      for (std::size_t i = q - 1; i > 0; --i) xs[i] = xs[i - 1];
      xs[0] = x;
    }
    if (t >= burn_in) out.push_back(y);
  }
  return out;
}

namespace {

Eigen::MatrixXd companion(const VarmaSpec& spec) {
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto p = static_cast<Eigen::Index>(spec.ar.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d * p, d * p);
  for (Eigen::Index j = 0; j < p; ++j) c.block(0, j * d, d, d) = -spec.ar[static_cast<std::size_t>(j)];
  if (p > 1) c.block(d, 0, d * (p - 1), d * (p - 1)).setIdentity();
  return c;
}

}  // namespace

double varma_companion_radius(const VarmaSpec& spec) {
  if (spec.ar.empty()) return 0.0;
  const Eigen::MatrixXd c = companion(spec);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(c, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

void VarmaSpec::validate() const {
  if (dim < 1) throw ConfigError("varma dimension must be positive", "dgp.dim");
  const auto d = static_cast<Eigen::Index>(dim);
  for (const auto& a : ar) {
    if (a.rows() != d || a.cols() != d) throw ConfigError("varma AR matrices must be dim x dim", "dgp.ar");
    if (!a.allFinite()) throw ConfigError("varma AR matrices must be finite", "dgp.ar");
  }
  for (const auto& m : ma) {
    if (m.rows() != d || m.cols() != d) throw ConfigError("varma MA matrices must be dim x dim", "dgp.ma");
    if (!m.allFinite()) throw ConfigError("varma MA matrices must be finite", "dgp.ma");
  }
  if (ar.empty()) return;
  // det A(z) != 0 on |z| <= 1 iff every companion eigenvalue is inside the
  // unit circle; the unit-circle scan guards against borderline roots.
  if (!(varma_companion_radius(*this) < 1.0)) {
    throw ConfigError("varma is not stationary: det A(z) has a root in the closed unit disk", "dgp.ar");
  }
  constexpr int kCirclePoints = 720;
  for (int s = 0; s < kCirclePoints; ++s) {
    const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * s / kCirclePoints);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(d, d);
    std::complex<double> zp = 1.0;
    for (const auto& aj : ar) {
      zp *= z;
      a += zp * aj.cast<std::complex<double>>();
    }
    if (std::abs(a.determinant()) < 1e-10) {
      throw ConfigError("varma is not stationary: det A(z) vanishes on the unit circle", "dgp.ar");
    }
  }
}

Eigen::MatrixXd gen_varma(const VarmaSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const std::size_t p = spec.ar.size();
  const std::size_t q = spec.ma.size();
  std::vector<Eigen::VectorXd> x_hist(p, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::VectorXd> e_hist(q, Eigen::VectorXd::Zero(d));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd e(d);
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    for (Eigen::Index c = 0; c < d; ++c) e(c) = rng.normal();
    Eigen::VectorXd x = e;
    for (std::size_t j = 0; j < p; ++j) x -= spec.ar[j] * x_hist[j];
    for (std::size_t j = 0; j < q; ++j) x += spec.ma[j] * e_hist[j];
    if (p > 0) {
      for (std::size_t j = p - 1; j > 0; --j) x_hist[j] = x_hist[j - 1];
      x_hist[0] = x;
    }
    if (q > 0) {
      for (std::size_t j = q - 1; j > 0; --j) e_hist[j] = e_hist[j - 1];
      e_hist[0] = e;
    }
    if (t >= burn_in) out.row(static_cast<Eigen::Index>(t - burn_in)) = x.transpose();
  }
  return out;
}

void Ar1Spec::validate() const {
  if (!(std::abs(phi) < 1.0)) throw ConfigError("ar1 coefficient must satisfy |phi| < 1", "dgp.phi");
  if (!(sigma >= 0.0)) throw ConfigError("ar1 innovation scale must be nonnegative", "dgp.sigma");
}

std::vector<double> gen_ar1_noise(const Ar1Spec& spec, std::size_t n, RngStream rng, std::size_t burn_in) {
  spec.validate();
  std::vector<double> out;
  out.reserve(n);
  double eps = 0.0;
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    eps = spec.phi * eps + spec.sigma * rng.normal();
    if (t >= burn_in) out.push_back(eps);
  }
  return out;
}

Dataset generate(const DgpSpec& spec, RngStream rng, std::size_t lags) {
  if (spec.n < 1) throw ConfigError("sample size must be positive", "n");
  if (const auto* sim = std::get_if<SimModelSpec>(&spec.kind)) return gen_sim_model(*sim, spec.n, rng, spec.burn_in);
  if (lags < 1) throw ConfigError("lags must be positive", "lags");
  const std::size_t total = spec.n + lags;
  if (const auto* g = std::get_if<GarchSpec>(&spec.kind)) return lagged_dataset(gen_garch(*g, total, rng, spec.burn_in), lags);
  if (const auto* a = std::get_if<Ar1Spec>(&spec.kind)) return lagged_dataset(gen_ar1_noise(*a, total, rng, spec.burn_in), lags);
  const auto& v = std::get<VarmaSpec>(spec.kind);
  const Eigen::MatrixXd series = gen_varma(v, total, rng, spec.burn_in);
  const auto d = series.cols();
  const auto l = static_cast<Eigen::Index>(lags);
  const auto n = static_cast<Eigen::Index>(spec.n);
  Eigen::MatrixXd x(n, d * l);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = i + l;
    y(i) = series(t, 0);
    for (Eigen::Index k = 1; k <= l; ++k) x.block(i, (k - 1) * d, 1, d) = series.row(t - k);
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace sieve
