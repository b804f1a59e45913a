#pragma once

#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sieve/core_model.hpp"
#include "sieve/rng.hpp"

namespace sieve {

enum class SimTarget { q1, q2 };

SimTarget parse_sim_target(std::string_view text);
std::string_view to_string(SimTarget target);

/// Q1(x) = sin(2 pi x1) + x2 and Q2(x) = (sin(2 pi x1) + 1) exp(-x2 / 2).
double sim_truth(SimTarget target, double x1, double x2);

/// Bivariate nonlinear regression with dependent covariates and errors:
///   X_i = 0.5 U_i + 0.3 U_{i-1} + 0.2 U_{i-2},
///   eps_i = ar eps_{i-1} + noise_scale eta_i,
///   Y_i = Q(X_i) + eps_i,
/// where U_i has uniform margins joined by a Gaussian copula whose rank
/// correlation equals `uniform_correlation`.
struct SimModelSpec {
  SimTarget target = SimTarget::q1;
  double uniform_correlation = 0.2876;
  double ar = 0.5;
  double noise_scale = 0.5;
};

/// Pearson correlation of the latent normals giving Spearman correlation
/// `rank_correlation` between the uniforms: 2 sin(pi r / 6).
double copula_normal_correlation(double rank_correlation);

/// Standard normal distribution function.
double normal_cdf(double z);

/// Draws the copula uniforms (U_1, U_2) for one time step.
Eigen::Vector2d draw_copula_uniforms(double normal_correlation, RngStream& rng);

Dataset gen_sim_model(const SimModelSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in = 200);

/// y_t = sqrt(x_t) eps_t, x_t = alpha0 + sum alpha_j y_{t-j}^2 + sum beta_i x_{t-i}.
struct GarchSpec {
  double alpha0 = 0.1;
  std::vector<double> alpha{0.1};
  std::vector<double> beta{0.8};

  /// Throws ConfigError unless alpha0 > 0, all coefficients >= 0 and
  /// sum alpha + sum beta < 1.
  void validate() const;
};

std::vector<double> gen_garch(const GarchSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in = 200);

/// A(L) x_t = M(L) e_t with A_0 = M_0 = I:
///   x_t = -sum_j A_j x_{t-j} + e_t + sum_j M_j e_{t-j}, e_t ~ N(0, I).
struct VarmaSpec {
  std::vector<Eigen::MatrixXd> ar;  // A_1..A_p
  std::vector<Eigen::MatrixXd> ma;  // M_1..M_q
  std::size_t dim = 1;

  /// Throws ConfigError when shapes disagree or det A(z) vanishes on |z| <= 1.
  void validate() const;
};

/// Spectral radius of the AR companion matrix; stationarity needs < 1.
double varma_companion_radius(const VarmaSpec& spec);

/// Rows are x_t, t = 1..n.
Eigen::MatrixXd gen_varma(const VarmaSpec& spec, std::size_t n, RngStream rng, std::size_t burn_in = 200);

/// eps_t = phi eps_{t-1} + sigma eta_t.
struct Ar1Spec {
  double phi = 0.5;
  double sigma = 1.0;
  void validate() const;
};

std::vector<double> gen_ar1_noise(const Ar1Spec& spec, std::size_t n, RngStream rng, std::size_t burn_in = 200);

using DgpKind = std::variant<SimModelSpec, VarmaSpec, GarchSpec, Ar1Spec>;

struct DgpSpec {
  DgpKind kind;
  std::size_t n = 500;
  std::size_t burn_in = 200;
};

/// Generates a dataset for any DGP. Scalar series (garch, ar1, d = 1 varma)
/// become autoregressive datasets with `lags` lagged covariates; for d > 1
/// VARMA the first component is the response and the lagged vector the
/// covariates. The simulation model ignores `lags`.
Dataset generate(const DgpSpec& spec, RngStream rng, std::size_t lags = 1);

}  // namespace sieve
