#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sieve/error.hpp"
#include "sieve/loss.hpp"

using namespace sieve;

namespace {

std::vector<LossSpec> all_losses() {
  return {LossSpec::quantile(0.5),  LossSpec::quantile(0.1), LossSpec::quantile(0.9), LossSpec::huber(1.5),
          LossSpec::expectile(0.9), LossSpec::expectile(0.5), LossSpec::lq(1.5),     LossSpec::lq(2.0),
          LossSpec::least_squares()};
}

}  // namespace

TEST_CASE("rho closed forms") {
  CHECK(rho(LossSpec::quantile(0.5), -2.0) == 1.0);
  CHECK(rho(LossSpec::huber(1.5), 2.0) == doctest::Approx(1.875).epsilon(1e-15));
  CHECK(rho(LossSpec::lq(2.0), 3.0) == 9.0);
  CHECK(rho(LossSpec::least_squares(), 3.0) == 4.5);
  CHECK(rho(LossSpec::expectile(0.9), -2.0) == doctest::Approx(0.1 * 4.0));
  CHECK(rho(LossSpec::huber(1.5), 1.0) == 0.5);
}

TEST_CASE("psi left derivatives") {
  const auto q = LossSpec::quantile(0.3);
  CHECK(psi(q, 1.0) == doctest::Approx(0.3));
  CHECK(psi(q, -1.0) == doctest::Approx(-0.7));
  CHECK(psi(q, 0.0) == doctest::Approx(-0.7));
  CHECK(psi(LossSpec::huber(1.5), -4.0) == -1.5);
  CHECK(psi(LossSpec::lq(1.5), 4.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(psi(LossSpec::expectile(0.9), 0.0) == 0.0);
  CHECK(psi(LossSpec::least_squares(), -2.5) == -2.5);
}

TEST_CASE("rho is convex, nonnegative and vanishes at zero") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const auto& loss : all_losses()) {
    CHECK(rho(loss, 0.0) == 0.0);
    for (int i = 0; i < 1000; ++i) {
      std::array<double, 3> p{u(gen), u(gen), u(gen)};
      std::sort(p.begin(), p.end());
      if (p[2] - p[0] < 1e-9) continue;
      const double w = (p[2] - p[1]) / (p[2] - p[0]);
      const double chord = w * rho(loss, p[0]) + (1.0 - w) * rho(loss, p[2]);
      CHECK(rho(loss, p[1]) <= chord + 1e-12 * (1.0 + std::abs(chord)));
      CHECK(rho(loss, p[0]) >= 0.0);
    }
  }
}

TEST_CASE("psi matches central differences away from kinks") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  const double h = 1e-5;
  for (const auto& loss : all_losses()) {
    for (int i = 0; i < 200; ++i) {
      const double r = u(gen);
      if (std::abs(r) < 0.01) continue;
      if (loss.family() == LossFamily::huber && std::abs(std::abs(r) - loss.parameter()) < 0.01) continue;
      const double fd = (rho(loss, r + h) - rho(loss, r - h)) / (2.0 * h);
      CHECK(fd == doctest::Approx(psi(loss, r)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("psi is nondecreasing") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const auto& loss : all_losses()) {
    for (int i = 0; i < 1000; ++i) {
      double a = u(gen), b = u(gen);
      if (a > b) std::swap(a, b);
      CHECK(psi(loss, a) <= psi(loss, b));
    }
    CHECK(psi(loss, -1e-300) <= psi(loss, 0.0));
    CHECK(psi(loss, 0.0) <= psi(loss, 1e-300));
  }
}

TEST_CASE("degenerate loss equivalences") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    const double r = u(gen);
    CHECK(rho(LossSpec::expectile(0.5), r) == doctest::Approx(rho(LossSpec::least_squares(), r)).epsilon(1e-15));
    CHECK(rho(LossSpec::lq(2.0), r) == doctest::Approx(2.0 * rho(LossSpec::least_squares(), r)).epsilon(1e-15));
  }
}

TEST_CASE("loss parsing and validation") {
  CHECK(LossSpec::parse("quantile:0.5") == LossSpec::quantile(0.5));
  CHECK(LossSpec::parse("huber:1.5") == LossSpec::huber(1.5));
  CHECK(LossSpec::parse("expectile:0.9") == LossSpec::expectile(0.9));
  CHECK(LossSpec::parse("lq:1.5") == LossSpec::lq(1.5));
  CHECK(LossSpec::parse("ls") == LossSpec::least_squares());
  for (const auto& loss : all_losses()) CHECK(LossSpec::parse(loss.to_string()) == loss);
  CHECK_THROWS_AS(LossSpec::parse("quantile:1.2"), ConfigError);
  CHECK_THROWS_AS(LossSpec::parse("lq:2.5"), ConfigError);
  CHECK_THROWS_AS(LossSpec::parse("huber:-1"), ConfigError);
  CHECK_THROWS_AS(LossSpec::parse("tukey:4"), ConfigError);
  CHECK_THROWS_AS(LossSpec::parse("quantile"), ConfigError);
  CHECK(LossSpec::quantile(0.5).is_kinked());
  CHECK(LossSpec::lq(1.5).is_kinked());
  CHECK_FALSE(LossSpec::lq(2.0).is_kinked());
  CHECK_FALSE(LossSpec::huber(1.0).is_kinked());
}
