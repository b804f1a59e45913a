#include "sieve/loss.hpp"

#include <charconv>
#include <cmath>

#include "sieve/error.hpp"
#include "sieve/format.hpp"

namespace sieve {

LossSpec LossSpec::quantile(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("quantile level tau must lie in (0, 1)", "loss");
  return {LossFamily::quantile, tau};
}

LossSpec LossSpec::huber(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("huber threshold c must be positive", "loss");
  return {LossFamily::huber, c};
}

LossSpec LossSpec::expectile(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("expectile level tau must lie in (0, 1)", "loss");
  return {LossFamily::expectile, tau};
}

LossSpec LossSpec::lq(double q) {
  if (!(q > 1.0 && q <= 2.0)) throw ConfigError("lq exponent q must lie in (1, 2]", "loss");
  return {LossFamily::lq, q};
}

LossSpec LossSpec::least_squares() { return {LossFamily::least_squares, 0.0}; }

LossSpec LossSpec::parse(std::string_view text) {
  if (text == "ls" || text == "least_squares") return least_squares();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unrecognised loss '" + std::string(text) + "'", "loss");
  const auto name = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
  if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
    throw ConfigError("invalid loss parameter in '" + std::string(text) + "'", "loss");
  }
  if (name == "quantile") return quantile(value);
  if (name == "huber") return huber(value);
  if (name == "expectile") return expectile(value);
  if (name == "lq") return lq(value);
  throw ConfigError("unrecognised loss family '" + std::string(name) + "'", "loss");
}

bool LossSpec::is_kinked() const noexcept {
  return family_ == LossFamily::quantile || (family_ == LossFamily::lq && param_ < 2.0);
}

std::string LossSpec::to_string() const {
  switch (family_) {
    case LossFamily::quantile: return "quantile:" + format_double(param_);
    case LossFamily::huber: return "huber:" + format_double(param_);
    case LossFamily::expectile: return "expectile:" + format_double(param_);
    case LossFamily::lq: return "lq:" + format_double(param_);
    case LossFamily::least_squares: return "ls";
  }
  return "ls";
}

double rho(const LossSpec& spec, double r) {
  const double p = spec.parameter();
  switch (spec.family()) {
    case LossFamily::quantile: return r > 0.0 ? p * r : (p - 1.0) * r;
    case LossFamily::huber: {
      const double a = std::abs(r);
      return a <= p ? 0.5 * r * r : p * a - 0.5 * p * p;
    }
    case LossFamily::expectile: return (r < 0.0 ? 1.0 - p : p) * r * r;
    case LossFamily::lq: return p == 2.0 ? r * r : std::pow(std::abs(r), p);
    case LossFamily::least_squares: return 0.5 * r * r;
  }
  return 0.0;
}

double psi(const LossSpec& spec, double r) {
  const double p = spec.parameter();
  switch (spec.family()) {
    case LossFamily::quantile: return r > 0.0 ? p : p - 1.0;
    case LossFamily::huber: return r < -p ? -p : (r > p ? p : r);
    case LossFamily::expectile: return 2.0 * (r < 0.0 ? 1.0 - p : p) * r;
    case LossFamily::lq: {
      if (r == 0.0) return 0.0;
      const double mag = p == 2.0 ? 2.0 * std::abs(r) : p * std::pow(std::abs(r), p - 1.0);
      return r > 0.0 ? mag : -mag;
    }
    case LossFamily::least_squares: return r;
  }
  return 0.0;
}

}  // namespace sieve
