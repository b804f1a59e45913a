#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sieve/dgp.hpp"
#include "sieve/error.hpp"

using namespace sieve;

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double lag1_autocorrelation(const std::vector<double>& v) {
  const double m = mean(v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    den += (v[i] - m) * (v[i] - m);
    if (i + 1 < v.size()) num += (v[i] - m) * (v[i + 1] - m);
  }
  return num / den;
}

std::vector<double> sim_errors(const Dataset& data, SimTarget target) {
  std::vector<double> eps(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    eps[i] = data.responses()(r) - sim_truth(target, data.covariates()(r, 0), data.covariates()(r, 1));
  }
  return eps;
}

}  // namespace

TEST_CASE("simulation truths") {
  CHECK(sim_truth(SimTarget::q1, 0.25, 0.5) == doctest::Approx(1.5));
  CHECK(sim_truth(SimTarget::q2, 0.25, 0.0) == doctest::Approx(2.0));
  CHECK(sim_truth(SimTarget::q2, 0.0, 2.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(parse_sim_target("Q2") == SimTarget::q2);
  CHECK(parse_sim_target("q1") == SimTarget::q1);
  CHECK(to_string(SimTarget::q1) == "Q1");
  CHECK_THROWS_AS(parse_sim_target("Q3"), ConfigError);
}

TEST_CASE("simulation covariates stay in the unit square") {
  const auto data = gen_sim_model(SimModelSpec{}, 2000, RngStream(3, 0));
  CHECK(data.n() == 2000);
  CHECK(data.d() == 2);
  CHECK(data.covariates().minCoeff() >= 0.0);
  CHECK(data.covariates().maxCoeff() <= 1.0);
}

TEST_CASE("zero noise reproduces the regression function") {
  SimModelSpec spec;
  spec.target = SimTarget::q2;
  spec.noise_scale = 0.0;
  const auto data = gen_sim_model(spec, 500, RngStream(4, 0));
  for (double e : sim_errors(data, spec.target)) CHECK(e == 0.0);
}

TEST_CASE("copula uniforms reach the target correlation") {
  const double rho = copula_normal_correlation(0.2876);
  CHECK(rho == doctest::Approx(2.0 * std::sin(std::numbers::pi * 0.2876 / 6.0)));
  RngStream rng(5, 0);
  const int n = 100000;
  std::vector<double> u1(n), u2(n);
  for (int i = 0; i < n; ++i) {
    const auto u = draw_copula_uniforms(rho, rng);
    u1[i] = u(0);
    u2[i] = u(1);
  }
  double cov = 0.0;
  const double m1 = mean(u1), m2 = mean(u2);
  for (int i = 0; i < n; ++i) cov += (u1[i] - m1) * (u2[i] - m2);
  cov /= n;
  CHECK(cov / std::sqrt(variance(u1) * variance(u2)) == doctest::Approx(0.2876).epsilon(0.01 / 0.2876));
  CHECK(m1 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("simulation errors follow the AR(1) recursion") {
  const auto data = gen_sim_model(SimModelSpec{}, 100000, RngStream(6, 0));
  const auto eps = sim_errors(data, SimTarget::q1);
  CHECK(std::abs(lag1_autocorrelation(eps) - 0.5) < 0.02);
  CHECK(variance(eps) == doctest::Approx(0.25 / 0.75).epsilon(0.05));
}

TEST_CASE("garch stationary variance") {
  const GarchSpec spec{0.1, {0.1}, {0.8}};
  const auto y = gen_garch(spec, 100000, RngStream(7, 0));
  CHECK(std::abs(variance(y) - 1.0) < 0.1);

  const GarchSpec iid{0.25, {0.0}, {0.0}};
  const auto z = gen_garch(iid, 50000, RngStream(7, 1));
  CHECK(variance(z) == doctest::Approx(0.25).epsilon(0.03));
  CHECK(std::abs(lag1_autocorrelation(z)) < 0.02);

  CHECK_THROWS_AS(gen_garch(GarchSpec{0.1, {0.3}, {0.7}}, 10, RngStream(1, 0)), ConfigError);
  CHECK_THROWS_AS((GarchSpec{0.0, {0.1}, {0.1}}.validate()), ConfigError);
}

TEST_CASE("varma recursions") {
  SUBCASE("scalar AR(1) autocorrelation") {
    VarmaSpec spec;
    spec.ar = {Eigen::MatrixXd::Constant(1, 1, -0.5)};
    const auto x = gen_varma(spec, 100000, RngStream(8, 0));
    std::vector<double> v(x.data(), x.data() + x.size());
    CHECK(std::abs(lag1_autocorrelation(v) - 0.5) < 0.02);
  }
  SUBCASE("pure moving average is an exact filter of the innovations") {
    VarmaSpec spec;
    spec.dim = 2;
    Eigen::MatrixXd m1(2, 2), m2(2, 2);
    m1 << 0.4, 0.1, -0.2, 0.3;
    m2 << 0.0, 0.5, 0.25, 0.0;
    spec.ma = {m1, m2};
    const std::size_t burn = 5, n = 50;
    const auto x = gen_varma(spec, n, RngStream(9, 2), burn);
    RngStream rng(9, 2);
    std::vector<Eigen::Vector2d> e(burn + n);
    for (auto& v : e) {
      v(0) = rng.normal();
      v(1) = rng.normal();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = burn + i;
      const Eigen::Vector2d expected = e[t] + m1 * e[t - 1] + m2 * e[t - 2];
      CHECK((x.row(static_cast<Eigen::Index>(i)).transpose() - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("unstable AR polynomial is rejected") {
    VarmaSpec spec;
    spec.ar = {Eigen::MatrixXd::Constant(1, 1, -1.2)};
    CHECK_THROWS_AS(gen_varma(spec, 10, RngStream(1, 0)), ConfigError);
    spec.ar = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    VarmaSpec bivariate;
    bivariate.dim = 2;
    Eigen::MatrixXd a(2, 2);
    a << -0.9, 0.5, 0.0, -0.9;
    bivariate.ar = {a};
    CHECK_NOTHROW(bivariate.validate());
    CHECK(varma_companion_radius(bivariate) == doctest::Approx(0.9));
    a(0, 0) = -1.1;
    bivariate.ar = {a};
    CHECK_THROWS_AS(bivariate.validate(), ConfigError);
  }
}

TEST_CASE("ar1 noise and generic datasets") {
  const auto eps = gen_ar1_noise(Ar1Spec{0.3, 2.0}, 100000, RngStream(10, 0));
  CHECK(std::abs(lag1_autocorrelation(eps) - 0.3) < 0.02);
  CHECK(variance(eps) == doctest::Approx(4.0 / 0.91).epsilon(0.05));
  CHECK_THROWS_AS((Ar1Spec{1.0, 1.0}.validate()), ConfigError);

  const auto data = generate(DgpSpec{Ar1Spec{0.5, 1.0}, 300, 100}, RngStream(11, 0), 2);
  CHECK(data.n() == 300);
  CHECK(data.d() == 2);
  for (Eigen::Index i = 1; i < 300; ++i) {
    CHECK(data.covariates()(i, 0) == data.responses()(i - 1));
    CHECK(data.covariates()(i, 1) == data.covariates()(i - 1, 0));
  }
  const auto sim = generate(DgpSpec{SimModelSpec{}, 50, 200}, RngStream(12, 0));
  CHECK(sim.d() == 2);
}

TEST_CASE("generators are deterministic and burn-in is sufficient") {
  const auto a = gen_sim_model(SimModelSpec{}, 300, RngStream(13, 5));
  const auto b = gen_sim_model(SimModelSpec{}, 300, RngStream(13, 5));
  CHECK(a.covariates() == b.covariates());
  CHECK(a.responses() == b.responses());

  const std::size_t n = 10000;
  const GarchSpec garch{0.1, {0.1}, {0.8}};
  const auto g1 = gen_garch(garch, n, RngStream(14, 0), 200);
  const auto g2 = gen_garch(garch, n, RngStream(14, 1), 400);
  const double se_g = std::sqrt((variance(g1) + variance(g2)) / n);
  CHECK(std::abs(mean(g1) - mean(g2)) < 3.0 * se_g);

  const auto e1 = sim_errors(gen_sim_model(SimModelSpec{}, n, RngStream(15, 0), 200), SimTarget::q1);
  const auto e2 = sim_errors(gen_sim_model(SimModelSpec{}, n, RngStream(15, 1), 400), SimTarget::q1);
  // AR(1) with phi = 0.5 inflates the standard error of the mean by sqrt(3).
  const double se_e = std::sqrt(3.0 * (variance(e1) + variance(e2)) / n);
  CHECK(std::abs(mean(e1) - mean(e2)) < 3.0 * se_e);
}
