#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sieve/bootstrap.hpp"
#include "sieve/error.hpp"
#include "sieve/parallel.hpp"
#include "sieve/solver.hpp"

using namespace sieve;

namespace {

Domain unit_interval() { return Domain(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)); }

/// y = sin(2 pi x) + AR(1) noise on a uniform design.
Dataset toy_data(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  RngStream rng(seed, 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  double e = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform();
    e = 0.4 * e + 0.5 * rng.normal();
    y(i) = std::sin(2.0 * 3.141592653589793 * x(i, 0)) + e + shift;
  }
  return Dataset(std::move(x), std::move(y));
}

FittedModel toy_fit(const Dataset& data, std::size_t k = 5) {
  const SieveBasis basis(BasisFamily::legendre(), {k}, unit_interval());
  return fit(data, basis, LossSpec::least_squares());
}

}  // namespace

TEST_CASE("zero multipliers give a zero replicate") {
  const auto data = toy_data(120, 1);
  const auto fitted = toy_fit(data);
  const auto blocks = fit_blocks(data, fitted.basis, fitted.loss, {}, 30);
  const auto phi = phi_replicate(blocks, fitted.theta, 30, RngStream(1, 1), 0, true);
  CHECK(phi.isZero(0.0));
}

TEST_CASE("a single full-length block reproduces the full fit") {
  const auto data = toy_data(150, 2);
  const auto fitted = toy_fit(data);
  const auto blocks = fit_blocks(data, fitted.basis, fitted.loss, {}, data.n());
  REQUIRE(blocks.size() == 1);
  const auto phi = phi_replicate(blocks, fitted.theta, data.n(), RngStream(2, 0), 0);
  CHECK(phi.norm() <= std::sqrt(150.0) * 1e-8);
}

TEST_CASE("replicate covariance matches the conditional covariance") {
  const std::size_t n = 200, M = 25;
  const auto data = toy_data(n, 3);
  const auto fitted = toy_fit(data, 4);
  const auto blocks = fit_blocks(data, fitted.basis, fitted.loss, {}, M);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
  for (const auto& t : blocks) expected += (t - fitted.theta) * (t - fitted.theta).transpose();
  expected *= static_cast<double>(M) / static_cast<double>(n - M + 1);

  const int B = 10000;
  const RngStream rng(3, 9);
  Eigen::MatrixXd sample = Eigen::MatrixXd::Zero(4, 4);
  for (int b = 0; b < B; ++b) {
    const auto phi = phi_replicate(blocks, fitted.theta, M, rng, static_cast<std::uint64_t>(b));
    sample += phi * phi.transpose();
  }
  sample /= B;
  CHECK((sample - expected).norm() / expected.norm() < 0.05);
}

TEST_CASE("block-sum covariance matches a brute-force double loop") {
  const std::size_t n = 80;
  const auto data = toy_data(n, 4);
  const auto fitted = toy_fit(data, 3);
  const auto K = static_cast<Eigen::Index>(fitted.basis.dim());
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), K);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Eigen::VectorXd b = fitted.basis.eval(data.covariates().row(i).transpose());
    z.row(i) = (psi(fitted.loss, data.responses()(i) - b.dot(fitted.theta)) * b).transpose();
  }
  const Eigen::RowVectorXd zbar = z.colwise().mean();
  for (std::size_t M : {1u, 7u, 80u}) {
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t j = 0; j + M <= n; ++j) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(K);
      for (std::size_t i = j; i < j + M; ++i) w += (z.row(static_cast<Eigen::Index>(i)) - zbar).transpose();
      w /= std::sqrt(static_cast<double>(M));
      oracle += w * w.transpose();
    }
    oracle /= static_cast<double>(n - M + 1);
    const auto sigma = estimate_sigma_z(data, fitted, M);
    CHECK((sigma - oracle).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + oracle.cwiseAbs().maxCoeff()));
    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    if (M == 1) {
      const Eigen::MatrixXd centered = z.rowwise() - zbar;
      const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
      CHECK((sigma - cov).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("identical scores give a zero covariance") {
  // Intercept-only fit of a constant response: every score is zero.
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(40, 1, 0.5);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  const Dataset data(x, Eigen::VectorXd::Constant(40, 3.0));
  const SieveBasis basis(BasisFamily::legendre(), {1}, unit_interval());
  const auto fitted = fit(data, basis, LossSpec::least_squares());
  CHECK(estimate_sigma_z(data, fitted, 5).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("scaling functions") {
  const SieveBasis basis(BasisFamily::legendre(), {3, 2},
                         Domain(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 1.0)));
  const Eigen::Vector2d x(0.3, 0.8);
  CHECK(scaling_h(Scaling::unit, basis, nullptr, x) == 1.0);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(6, 6);
  CHECK(scaling_h(Scaling::stddev, basis, &identity, x) == doctest::Approx(basis.eval(x).norm()).epsilon(1e-14));
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(6, 6);
  CHECK(scaling_floor(zero) == 1e-8);
  CHECK(scaling_h(Scaling::stddev, basis, &zero, x) == 1e-8);
  const Eigen::MatrixXd scaled = 4.0 * identity;
  CHECK(scaling_floor(scaled) == doctest::Approx(2e-8));
  CHECK_THROWS_AS(scaling_h(Scaling::stddev, basis, nullptr, x), ConfigError);
  CHECK_THROWS_AS(scaling_h(Scaling::stddev, basis, &identity, Eigen::Vector2d(1.5, 0.5)), DomainError);
  CHECK(parse_scaling("stddev") == Scaling::stddev);
  CHECK_THROWS_AS(parse_scaling("studentized"), ConfigError);
}

TEST_CASE("nearest-rank critical values") {
  std::vector<double> stats(2000);
  std::iota(stats.begin(), stats.end(), 1.0);
  std::shuffle(stats.begin(), stats.end(), std::mt19937_64(7));
  CHECK(critical_value_from(stats, 0.05) == 1900.0);
  CHECK(critical_value_from(stats, 0.10) == 1800.0);
  CHECK(critical_value_from({4.0, 1.0, 3.0}, 0.5) == 3.0);
  CHECK(critical_value_from({2.5}, 0.01) == 2.5);
}

TEST_CASE("single replicate and monotone levels") {
  const auto data = toy_data(150, 5);
  const auto fitted = toy_fit(data);
  const EvaluationGrid grid(fitted.basis.domain(), {51});
  BootstrapConfig cfg;
  cfg.M = 20;
  cfg.B = 1;
  cfg.alphas = {0.01, 0.05, 0.5};
  const auto one = run_bootstrap(data, fitted, grid, cfg);
  REQUIRE(one.sup_stats.size() == 1);
  for (const auto& [alpha, c] : one.critical_values) CHECK(c == one.sup_stats[0]);
  CHECK_FALSE(one.warnings.empty());

  cfg.B = 300;
  cfg.alphas = {0.05, 0.10, 0.5};
  const auto many = run_bootstrap(data, fitted, grid, cfg);
  CHECK(many.critical_value(0.05) >= many.critical_value(0.10));
  CHECK(many.critical_value(0.10) >= many.critical_value(0.5));
  for (double s : many.sup_stats) CHECK((std::isfinite(s) && s >= 0.0));
  CHECK(many.critical_value(0.2) == critical_value_from(many.sup_stats, 0.2));
}

TEST_CASE("sup statistics are shift invariant under least squares") {
  const auto data = toy_data(160, 6);
  const auto shifted = data.shifted(12.5);
  SolverConfig exact;
  exact.ridge = 0.0;
  const SieveBasis basis(BasisFamily::legendre(), {5}, unit_interval());
  const auto a = fit(data, basis, LossSpec::least_squares(), exact);
  const auto b = fit(shifted, basis, LossSpec::least_squares(), exact);
  const EvaluationGrid grid(a.basis.domain(), {41});
  BootstrapConfig cfg;
  cfg.M = 16;
  cfg.B = 200;
  const auto ra = run_bootstrap(data, a, grid, cfg, exact);
  const auto rb = run_bootstrap(shifted, b, grid, cfg, exact);
  for (std::size_t i = 0; i < ra.sup_stats.size(); ++i) {
    CHECK(rb.sup_stats[i] == doctest::Approx(ra.sup_stats[i]).epsilon(1e-9));
  }
}

TEST_CASE("refining a nested grid never lowers the sup") {
  const auto data = toy_data(140, 7);
  const auto fitted = toy_fit(data);
  const EvaluationGrid coarse(fitted.basis.domain(), {11});
  BootstrapConfig cfg;
  cfg.M = 20;
  cfg.B = 200;
  cfg.scaling = Scaling::stddev;
  const auto rc = run_bootstrap(data, fitted, coarse, cfg);
  const auto rf = run_bootstrap(data, fitted, coarse.refined(4), cfg);
  for (std::size_t i = 0; i < rc.sup_stats.size(); ++i) CHECK(rf.sup_stats[i] >= rc.sup_stats[i]);
  REQUIRE(rc.sigma_z);
  CHECK(rc.sigma_z->isApprox(rc.sigma_z->transpose(), 0.0));
}

TEST_CASE("bootstrap output does not depend on the worker count") {
  const auto data = toy_data(200, 8);
  const auto fitted = toy_fit(data);
  const EvaluationGrid grid(fitted.basis.domain(), {31});
  BootstrapConfig cfg;
  cfg.M = 20;
  cfg.B = 257;
  cfg.seed = 99;
  set_worker_count(1);
  const auto serial = run_bootstrap(data, fitted, grid, cfg);
  set_worker_count(4);
  const auto threaded = run_bootstrap(data, fitted, grid, cfg);
  set_worker_count(0);
  CHECK(serial.sup_stats == threaded.sup_stats);
  cfg.stream_id = 1;
  const auto other = run_bootstrap(data, fitted, grid, cfg);
  CHECK(other.sup_stats != serial.sup_stats);
}

TEST_CASE("intercept-only band matches the sample-mean band") {
  const std::size_t n = 400;
  RngStream rng(2024, 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
    y(i) = rng.normal();
  }
  const Dataset data(x, y);
  const auto fitted = toy_fit(data, 1);
  const EvaluationGrid grid(fitted.basis.domain(), {5});
  BootstrapConfig cfg;
  cfg.M = 20;
  cfg.B = 4000;
  cfg.seed = 17;
  const auto boot = run_bootstrap(data, fitted, grid, cfg);
  // Half-width C / sqrt(n) against 1.96 times the standard error 1 / sqrt(n).
  CHECK(boot.critical_value(0.05) == doctest::Approx(1.959964).epsilon(0.15));
}

TEST_CASE("bootstrap configuration errors") {
  BootstrapConfig cfg;
  cfg.M = 0;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.M = 11;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.M = 5;
  cfg.alphas = {1.0};
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);
  cfg.alphas = {0.1};
  cfg.B = 0;
  CHECK_THROWS_AS(cfg.validate(10), ConfigError);

  const auto data = toy_data(60, 9);
  const auto fitted = toy_fit(data, 3);
  const EvaluationGrid outside(Domain(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0)), {5});
  cfg.B = 10;
  CHECK_THROWS_AS(run_bootstrap(data, fitted, outside, cfg), DomainError);
}
