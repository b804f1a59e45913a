#include "sieve/basis.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "sieve/error.hpp"

namespace sieve {

namespace {

constexpr int kMaxDaubechiesOrder = 10;
constexpr int kCascadeLevels = 12;
constexpr double kCascadeScale = 1 << kCascadeLevels;

using Complex = std::complex<double>;

std::vector<Complex> poly_mul(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  std::vector<Complex> out(a.size() + b.size() - 1, Complex{0.0, 0.0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Roots of sum_k coeffs[k] y^k (ascending powers) via the companion matrix.
std::vector<Complex> poly_roots(const std::vector<double>& coeffs) {
  const auto deg = static_cast<Eigen::Index>(coeffs.size()) - 1;
  if (deg < 1) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  const double lead = coeffs.back();
  for (Eigen::Index i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[static_cast<std::size_t>(i)] / lead;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<Complex> roots;
  for (Eigen::Index i = 0; i < deg; ++i) roots.push_back(solver.eigenvalues()(i));
  return roots;
}

/// Dyadic samples phi(i / 2^12), i = 0..(2N-1) 2^12, from the cascade algorithm.
std::vector<double> build_cascade_table(int order) {
  const auto h = daubechies_filter(order);
  const int taps = 2 * order;
  const int support = taps - 1;

  // Values at the integers: eigenvector of A_{ij} = sqrt2 h_{2i-j} for
  // eigenvalue 1, normalized so the samples sum to one (partition of unity).
  const int m = support + 1;
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m + 1, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const int k = 2 * i - j;
      if (k >= 0 && k < taps) system(i, j) = std::numbers::sqrt2 * h[static_cast<std::size_t>(k)];
    }
    system(i, i) -= 1.0;
    system(m, i) = 1.0;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
  rhs(m) = 1.0;
  Eigen::VectorXd integer_values = system.colPivHouseholderQr().solve(rhs);
  integer_values(0) = 0.0;
  integer_values(support) = 0.0;

  std::vector<double> values(integer_values.data(), integer_values.data() + m);
  for (int level = 1; level <= kCascadeLevels; ++level) {
    const std::size_t half = std::size_t{1} << (level - 1);  // old spacing is 1 / half
    std::vector<double> next(values.size() * 2 - 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) next[2 * i] = values[i];
    // phi(x) = sqrt2 sum_k h_k phi(2x - k); for x = (2p+1) / (2 half) the
    // argument 2x - k sits at old index (2p+1) - k half.
    for (std::size_t p = 0; p + 1 < values.size(); ++p) {
      double acc = 0.0;
      for (int k = 0; k < taps; ++k) {
        const auto offset = static_cast<std::ptrdiff_t>(k) * static_cast<std::ptrdiff_t>(half);
        const auto idx = static_cast<std::ptrdiff_t>(2 * p + 1) - offset;
        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(values.size())) {
          acc += h[static_cast<std::size_t>(k)] * values[static_cast<std::size_t>(idx)];
        }
      }
      next[2 * p + 1] = std::numbers::sqrt2 * acc;
    }
    values = std::move(next);
  }
  return values;
}

const std::vector<double>& cascade_table(int order) {
  static std::array<std::once_flag, kMaxDaubechiesOrder + 1> flags;
  static std::array<std::vector<double>, kMaxDaubechiesOrder + 1> tables;
  std::call_once(flags[static_cast<std::size_t>(order)],
                 [order] { tables[static_cast<std::size_t>(order)] = build_cascade_table(order); });
  return tables[static_cast<std::size_t>(order)];
}

void eval_trigonometric(std::size_t count, double u, double* out) {
  out[0] = std::numbers::sqrt2 / 2.0;
  for (std::size_t j = 1; 2 * j - 1 < count; ++j) {
    const double arg = static_cast<double>(j) * std::numbers::pi * u;
    out[2 * j - 1] = std::sin(arg);
    if (2 * j < count) out[2 * j] = std::cos(arg);
  }
}

void eval_legendre(std::size_t count, double u, double* out) {
  double prev = 0.0;
  double cur = 1.0;
  for (std::size_t j = 0; j < count; ++j) {
    out[j] = cur * std::sqrt(static_cast<double>(j) + 0.5);
    const double jj = static_cast<double>(j);
    const double next = ((2.0 * jj + 1.0) * u * cur - jj * prev) / (jj + 1.0);
    prev = cur;
    cur = next;
  }
}

void eval_daubechies(int order, std::size_t count, double u, double* out) {
  const double t = 0.5 * (u + 1.0);
  const double scale = static_cast<double>(count);
  const double amplitude = std::sqrt(scale);
  const double support = 2.0 * order - 1.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double s0 = scale * t - static_cast<double>(k);
    double acc = 0.0;
    const auto l_first = static_cast<long>(std::ceil(-s0 / scale));
    const auto l_last = static_cast<long>(std::floor((support - s0) / scale));
    for (long l = l_first; l <= l_last; ++l) acc += daubechies_scaling(order, s0 + scale * static_cast<double>(l));
    out[k] = amplitude * acc;
  }
}

}  // namespace

BasisFamily BasisFamily::daubechies(int order) {
  if (order < 1 || order > kMaxDaubechiesOrder) {
    throw ConfigError("daubechies order must lie in 1..10, got " + std::to_string(order), "basis");
  }
  return BasisFamily(Kind::daubechies, order);
}

BasisFamily BasisFamily::parse(std::string_view text) {
  if (text == "trig" || text == "trigonometric" || text == "fourier") return trigonometric();
  if (text == "legendre") return legendre();
  if (text == "haar") return daubechies(1);
  if (text.substr(0, 11) == "daubechies:") {
    const auto arg = text.substr(11);
    int order = 0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), order);
    if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
      throw ConfigError("invalid daubechies order in '" + std::string(text) + "'", "basis");
    }
    return daubechies(order);
  }
  throw ConfigError("unrecognised basis family '" + std::string(text) + "'", "basis");
}

std::string BasisFamily::to_string() const {
  switch (kind_) {
    case Kind::trigonometric: return "trig";
    case Kind::legendre: return "legendre";
    case Kind::daubechies: return "daubechies:" + std::to_string(order_);
  }
  return "legendre";
}

void BasisFamily::validate_count(std::size_t count) const {
  if (count == 0) throw ConfigError("basis count must be positive", "k");
  if (kind_ == Kind::trigonometric && count % 2 == 0) {
    throw ConfigError("trigonometric basis needs an odd count (1 + 2m), got " + std::to_string(count), "k");
  }
  if (kind_ == Kind::daubechies && (count & (count - 1)) != 0) {
    throw ConfigError("daubechies basis count must be a power of two 2^J, got " + std::to_string(count), "k");
  }
}

Eigen::VectorXd eval_univariate(const BasisFamily& family, std::size_t count, double u) {
  family.validate_count(count);
  if (!(u >= -1.0 && u <= 1.0)) throw DomainError("basis argument must lie in [-1, 1]");
  Eigen::VectorXd out(static_cast<Eigen::Index>(count));
  switch (family.kind()) {
    case BasisFamily::Kind::trigonometric: eval_trigonometric(count, u, out.data()); break;
    case BasisFamily::Kind::legendre: eval_legendre(count, u, out.data()); break;
    case BasisFamily::Kind::daubechies: eval_daubechies(family.order(), count, u, out.data()); break;
  }
  return out;
}

std::vector<double> daubechies_filter(int order) {
  if (order < 1 || order > kMaxDaubechiesOrder) {
    throw ConfigError("daubechies order must lie in 1..10, got " + std::to_string(order), "basis");
  }
  // Spectral factorization: |Q|^2 = P(y), P(y) = sum_k C(N-1+k, k) y^k with
  // y = (2 - z - 1/z) / 4; keep the root of each pair inside the unit circle.
  std::vector<double> p_coeffs;
  double binom = 1.0;
  for (int k = 0; k < order; ++k) {
    if (k > 0) binom = binom * (order - 1 + k) / k;
    p_coeffs.push_back(binom);
  }
  std::vector<Complex> q{Complex{1.0, 0.0}};
  for (const auto& y : poly_roots(p_coeffs)) {
    const Complex b = 2.0 - 4.0 * y;
    const Complex disc = std::sqrt(b * b - 4.0);
    Complex z = 0.5 * (b + disc);
    if (std::abs(z) > 1.0) z = 0.5 * (b - disc);
    q = poly_mul(q, {Complex{1.0, 0.0}, -z});
  }
  std::vector<Complex> binomial{Complex{1.0, 0.0}};
  for (int k = 0; k < order; ++k) binomial = poly_mul(binomial, {Complex{1.0, 0.0}, Complex{1.0, 0.0}});
  const auto full = poly_mul(binomial, q);
  std::vector<double> h;
  double sum = 0.0;
  for (const auto& c : full) {
    h.push_back(c.real());
    sum += c.real();
  }
  for (auto& v : h) v *= std::numbers::sqrt2 / sum;
  return h;
}

double daubechies_scaling(int order, double x) {
  if (order == 1) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
  const auto& table = cascade_table(order);
  const double pos = x * kCascadeScale;
  if (!(pos >= 0.0)) return 0.0;
  const double last = static_cast<double>(table.size() - 1);
  if (pos >= last) return pos == last ? table.back() : 0.0;
  const auto i0 = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i0);
  return frac == 0.0 ? table[i0] : (1.0 - frac) * table[i0] + frac * table[i0 + 1];
}

Eigen::VectorXd kronecker(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

SieveBasis::SieveBasis(std::vector<BasisFamily> families, std::vector<std::size_t> per_dim_counts, Domain domain)
    : families_(std::move(families)), counts_(std::move(per_dim_counts)), domain_(std::move(domain)), dim_(1) {
  if (counts_.empty() || families_.size() != counts_.size() || counts_.size() != domain_.d()) {
    throw ConfigError("basis needs one family and one count per covariate (d = " + std::to_string(domain_.d()) + ")",
                      "k");
  }
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    families_[j].validate_count(counts_[j]);
    dim_ *= counts_[j];
  }
}

SieveBasis::SieveBasis(const BasisFamily& family, std::vector<std::size_t> per_dim_counts, Domain domain)
    : SieveBasis(std::vector<BasisFamily>(per_dim_counts.size(), family), per_dim_counts, std::move(domain)) {}

double SieveBasis::to_reference(std::size_t j, double x) const {
  const auto jj = static_cast<Eigen::Index>(j);
  const double lo = domain_.lower()(jj);
  const double hi = domain_.upper()(jj);
  return std::clamp(-1.0 + 2.0 * (x - lo) / (hi - lo), -1.0, 1.0);
}

void SieveBasis::eval_into(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const {
  if (static_cast<std::size_t>(x.size()) != d()) throw ConfigError("point dimension does not match basis");
  if (!domain_.contains(x)) {
    out.setZero();
    return;
  }
  // Build the Kronecker product in place, innermost coordinate last.
  std::array<double, 64> scratch_small{};
  std::vector<double> scratch_large;
  std::size_t max_count = *std::max_element(counts_.begin(), counts_.end());
  double* scratch = scratch_small.data();
  if (max_count > scratch_small.size()) {
    scratch_large.resize(max_count);
    scratch = scratch_large.data();
  }
  out(0) = 1.0;
  std::size_t filled = 1;
  for (std::size_t j = 0; j < d(); ++j) {
    const double u = to_reference(j, x(static_cast<Eigen::Index>(j)));
    const std::size_t c = counts_[j];
    switch (families_[j].kind()) {
      case BasisFamily::Kind::trigonometric: eval_trigonometric(c, u, scratch); break;
      case BasisFamily::Kind::legendre: eval_legendre(c, u, scratch); break;
      case BasisFamily::Kind::daubechies: eval_daubechies(families_[j].order(), c, u, scratch); break;
    }
    for (std::size_t a = filled; a-- > 0;) {
      const double head = out(static_cast<Eigen::Index>(a));
      for (std::size_t b = 0; b < c; ++b) out(static_cast<Eigen::Index>(a * c + b)) = head * scratch[b];
    }
    filled *= c;
  }
}

Eigen::VectorXd SieveBasis::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dim_));
  eval_into(x, out);
  return out;
}

Eigen::MatrixXd SieveBasis::design(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(dim_));
  Eigen::VectorXd row(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    eval_into(points.row(i).transpose(), row);
    out.row(i) = row.transpose();
  }
  return out;
}

Eigen::VectorXd SieveBasis::constant_coefficients() const {
  Eigen::VectorXd coeffs = Eigen::VectorXd::Ones(1);
  for (std::size_t j = 0; j < d(); ++j) {
    const auto c = static_cast<Eigen::Index>(counts_[j]);
    Eigen::VectorXd one = Eigen::VectorXd::Zero(c);
    if (families_[j].kind() == BasisFamily::Kind::daubechies) {
      // sum_k phi_{J,k} = 2^{J/2} by the partition of unity.
      one.setConstant(1.0 / std::sqrt(static_cast<double>(c)));
    } else {
      one(0) = std::numbers::sqrt2;
    }
    coeffs = kronecker(coeffs, one);
  }
  return coeffs;
}

}  // namespace sieve
