#include <doctest.h>

#include <cmath>

#include "sieve/error.hpp"
#include "sieve/harness.hpp"
#include "sieve/parallel.hpp"

using namespace sieve;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.n = 200;
  spec.replications = 6;
  spec.B = 60;
  spec.family = BasisFamily::legendre();
  spec.losses = {LossSpec::least_squares(), LossSpec::quantile(0.5)};
  spec.k = std::vector<std::size_t>{3, 3};
  spec.grid = {11, 11};
  return spec;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.141592653589793); }

}  // namespace

TEST_CASE("loss shifts under gaussian errors") {
  CHECK(gaussian_loss_shift(LossSpec::least_squares(), 2.0) == 0.0);
  CHECK(gaussian_loss_shift(LossSpec::huber(1.5), 2.0) == 0.0);
  CHECK(gaussian_loss_shift(LossSpec::quantile(0.5), 2.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(gaussian_loss_shift(LossSpec::quantile(0.975), 1.0) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(gaussian_loss_shift(LossSpec::quantile(0.02), 0.5) == doctest::Approx(-0.5 * 2.0537489).epsilon(1e-6));
  CHECK(gaussian_loss_shift(LossSpec::expectile(0.5), 3.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Expectile c solves tau E(eps - c)^+ = (1 - tau) E(c - eps)^+, checked by quadrature.
  const double tau = 0.9, sd = 0.7;
  const double c = gaussian_loss_shift(LossSpec::expectile(tau), sd);
  double upper = 0.0, lower = 0.0;
  const int steps = 200000;
  const double h = 20.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const double z = -10.0 + (i + 0.5) * h;
    const double e = sd * z - c;
    (e > 0 ? upper : lower) += std::abs(e) * normal_pdf(z) * h;
  }
  CHECK(tau * upper == doctest::Approx((1.0 - tau) * lower).epsilon(1e-6));
  CHECK(sim_error_sd(SimModelSpec{}) == doctest::Approx(0.5 / std::sqrt(0.75)));
}

TEST_CASE("automatic block length policy") {
  CHECK(effective_block_length(9, 25, 500, 6.0) == 150);
  CHECK(effective_block_length(9, 49, 500, 6.0) == 250);
  CHECK(effective_block_length(200, 4, 500, 6.0) == 200);
  CHECK(effective_block_length(9, 5, 500, 2.5) == 13);
  CHECK(effective_block_length(9, 5, 500, 0.0) == 9);
}

TEST_CASE("coverage experiment is deterministic across worker counts") {
  const auto spec = small_spec();
  set_worker_count(1);
  const auto a = run_coverage_experiment(spec);
  set_worker_count(3);
  const auto b = run_coverage_experiment(spec);
  set_worker_count(0);
  REQUIRE(a.rows.size() == 4);
  REQUIRE(b.rows.size() == 4);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].coverage == b.rows[i].coverage);
    CHECK(a.rows[i].mean_half_width == b.rows[i].mean_half_width);
    CHECK(a.rows[i].successes + a.rows[i].failures == spec.replications);
  }
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].critical_values == b.log[i].critical_values);
  CHECK(a.rows[0].loss == "ls");
  CHECK(a.rows[2].loss == "quantile:0.5");
}

TEST_CASE("coverage is monotone in the nominal level per replication") {
  auto spec = small_spec();
  spec.k.reset();
  spec.k_candidates = {2, 3};
  spec.losses = {LossSpec::least_squares()};
  const auto table = run_coverage_experiment(spec);
  for (const auto& rec : table.log) {
    REQUIRE(rec.error.empty());
    REQUIRE(rec.covered.size() == 2);
    CHECK(rec.critical_values[0].second >= rec.critical_values[1].second);
    if (rec.covered[1].second) CHECK(rec.covered[0].second);
    CHECK(rec.M >= 6 * rec.k[0] * rec.k[1]);
  }
  CHECK(table.rows[0].coverage >= table.rows[1].coverage);
  const auto& row = table.rows[0];
  CHECK(row.band == doctest::Approx(2.0 * std::sqrt(row.coverage * (1.0 - row.coverage) / row.successes)));
}

TEST_CASE("experiment configuration errors") {
  auto spec = small_spec();
  spec.replications = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.grid = {11};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.family = BasisFamily::trigonometric();
  spec.k = std::vector<std::size_t>{4, 4};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.M = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.alphas = {0.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("too many failed replications abort the experiment") {
  auto spec = small_spec();
  spec.k = std::vector<std::size_t>{6, 6};
  spec.M = 20;  // fewer rows per block than basis functions
  CHECK_THROWS_AS(run_coverage_experiment(spec), NumericError);
}
