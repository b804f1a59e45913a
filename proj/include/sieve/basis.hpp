#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sieve/core_model.hpp"

namespace sieve {

/// Univariate sieve family.
///
/// Every family is orthonormal on its reference interval:
///  - trigonometric: {1/sqrt2, sin(j pi u), cos(j pi u)} on [-1, 1], odd counts;
///  - legendre: sqrt(j + 1/2) P_j(u) on [-1, 1];
///  - daubechies(N): periodized scaling functions phi_{J,k}, k < 2^J, on [0, 1],
///    reached from u in [-1, 1] through t = (u + 1) / 2. The count is 2^J.
class BasisFamily {
 public:
  enum class Kind { trigonometric, legendre, daubechies };

  static BasisFamily trigonometric() { return BasisFamily(Kind::trigonometric, 0); }
  static BasisFamily legendre() { return BasisFamily(Kind::legendre, 0); }
  static BasisFamily daubechies(int order);

  /// Parses `trig`, `trigonometric`, `fourier`, `legendre` or `daubechies:N`.
  static BasisFamily parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  /// Daubechies order N; 0 for other families.
  int order() const noexcept { return order_; }
  std::string to_string() const;

  /// Throws ConfigError when `count` is not admissible for this family.
  void validate_count(std::size_t count) const;

  bool operator==(const BasisFamily&) const = default;

 private:
  BasisFamily(Kind kind, int order) : kind_(kind), order_(order) {}
  Kind kind_;
  int order_;
};

/// First `count` orthonormal functions of `family` at u in [-1, 1].
Eigen::VectorXd eval_univariate(const BasisFamily& family, std::size_t count, double u);

/// Daubechies low-pass filter h_0..h_{2N-1}, normalized so that sum h = sqrt 2.
std::vector<double> daubechies_filter(int order);

/// Father wavelet phi of class N at real x, support [0, 2N - 1]; values come
/// from the cascade algorithm at 12 dyadic levels with linear interpolation.
/// N = 1 is the exact Haar box function.
double daubechies_scaling(int order, double x);

/// Tensor-product sieve b_omega(x) = (b^(1) (x) ... (x) b^(d))(a(x)) 1{x in D}.
class SieveBasis {
 public:
  SieveBasis(std::vector<BasisFamily> families, std::vector<std::size_t> per_dim_counts, Domain domain);

  /// Same family in every coordinate.
  SieveBasis(const BasisFamily& family, std::vector<std::size_t> per_dim_counts, Domain domain);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t d() const noexcept { return counts_.size(); }
  const std::vector<BasisFamily>& families() const noexcept { return families_; }
  const std::vector<std::size_t>& per_dim_counts() const noexcept { return counts_; }
  const Domain& domain() const noexcept { return domain_; }

  /// b_omega(x); all zeros outside the domain.
  Eigen::VectorXd eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void eval_into(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;

  /// Row i holds b_omega(X_i).
  Eigen::MatrixXd design(const Eigen::MatrixXd& points) const;

  /// Coefficients c with c^T b(x) = 1 for every x in the domain.
  Eigen::VectorXd constant_coefficients() const;

  /// Affine map of coordinate j from [lower_j, upper_j] onto [-1, 1].
  double to_reference(std::size_t j, double x) const;

 private:
  std::vector<BasisFamily> families_;
  std::vector<std::size_t> counts_;
  Domain domain_;
  std::size_t dim_;
};

/// Kronecker product a (x) b with a outermost.
Eigen::VectorXd kronecker(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace sieve
