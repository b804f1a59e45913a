#pragma once

#include <string>
#include <string_view>

namespace sieve {

enum class LossFamily { quantile, huber, expectile, lq, least_squares };

/// Convex loss rho with left derivative psi.
///
/// | family        | parameter | rho(r)                        |
/// |---------------|-----------|-------------------------------|
/// | quantile      | tau       | tau r+ + (1 - tau) r-         |
/// | huber         | c         | r^2/2 or c|r| - c^2/2         |
/// | expectile     | tau       | |tau - 1{r < 0}| r^2          |
/// | lq            | q         | |r|^q                         |
/// | least_squares | -         | r^2 / 2                       |
class LossSpec {
 public:
  static LossSpec quantile(double tau);
  static LossSpec huber(double c);
  static LossSpec expectile(double tau);
  static LossSpec lq(double q);
  static LossSpec least_squares();

  /// Parses `quantile:0.5`, `huber:1.5`, `expectile:0.9`, `lq:1.5` or `ls`.
  static LossSpec parse(std::string_view text);

  LossFamily family() const noexcept { return family_; }
  /// tau, c or q depending on the family; 0 for least squares.
  double parameter() const noexcept { return param_; }

  /// True when psi has a jump or rho has unbounded curvature, so the solver
  /// needs a smoothing schedule.
  bool is_kinked() const noexcept;

  /// Inverse of parse().
  std::string to_string() const;

  bool operator==(const LossSpec&) const = default;

 private:
  LossSpec(LossFamily family, double param) : family_(family), param_(param) {}
  LossFamily family_;
  double param_;
};

double rho(const LossSpec& spec, double r);

/// Left derivative of rho. At kinks: quantile psi(0) = tau - 1.
double psi(const LossSpec& spec, double r);

}  // namespace sieve
