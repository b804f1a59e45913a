#include "sieve/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sieve/error.hpp"
#include "sieve/format.hpp"

namespace sieve {

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim_view(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool is_covariate_name(std::string_view name, long& index) {
  if (name.size() < 2 || name.front() != 'x') return false;
  const auto* first = name.data() + 1;
  const auto* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  return ec == std::errc{} && ptr == last && index >= 1;
}

}  // namespace

Dataset::Dataset(Eigen::MatrixXd covariates, Eigen::VectorXd responses)
    : covariates_(std::move(covariates)), responses_(std::move(responses)) {
  if (responses_.size() == 0) throw DataError("dataset must contain at least one observation");
  if (covariates_.rows() != responses_.size()) {
    throw DataError("covariates have " + std::to_string(covariates_.rows()) + " rows but responses have " +
                    std::to_string(responses_.size()));
  }
  if (covariates_.cols() == 0) throw DataError("dataset must have at least one covariate");
  for (Eigen::Index i = 0; i < responses_.size(); ++i) {
    if (!std::isfinite(responses_(i))) {
      throw DataError("non-finite response at row " + std::to_string(i + 1), static_cast<std::size_t>(i + 1), "y");
    }
    for (Eigen::Index j = 0; j < covariates_.cols(); ++j) {
      if (!std::isfinite(covariates_(i, j))) {
        const std::string col = "x" + std::to_string(j + 1);
        throw DataError("non-finite covariate " + col + " at row " + std::to_string(i + 1),
                        static_cast<std::size_t>(i + 1), col);
      }
    }
  }
}

Dataset Dataset::window(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > n()) throw ConfigError("window out of range");
  const auto f = static_cast<Eigen::Index>(first);
  const auto c = static_cast<Eigen::Index>(count);
  return Dataset(covariates_.middleRows(f, c), responses_.segment(f, c));
}

Dataset Dataset::select_covariates(std::span<const std::size_t> columns) const {
  if (columns.empty()) throw ConfigError("covariate subset must be nonempty");
  Eigen::MatrixXd x(covariates_.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= d()) throw ConfigError("covariate index " + std::to_string(columns[k] + 1) + " out of range");
    x.col(static_cast<Eigen::Index>(k)) = covariates_.col(static_cast<Eigen::Index>(columns[k]));
  }
  return Dataset(std::move(x), responses_);
}

Dataset Dataset::shifted(double delta) const {
  return Dataset(covariates_, (responses_.array() + delta).matrix());
}

Domain::Domain(Eigen::VectorXd lower, Eigen::VectorXd upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) throw ConfigError("domain bounds must have equal, positive length");
  for (Eigen::Index j = 0; j < lower_.size(); ++j) {
    if (!std::isfinite(lower_(j)) || !std::isfinite(upper_(j)) || !(lower_(j) < upper_(j))) {
      throw ConfigError("domain coordinate " + std::to_string(j + 1) + " needs finite lower < upper");
    }
  }
}

Domain Domain::select(std::span<const std::size_t> coordinates) const {
  Eigen::VectorXd lo(static_cast<Eigen::Index>(coordinates.size()));
  Eigen::VectorXd hi(lo.size());
  for (std::size_t k = 0; k < coordinates.size(); ++k) {
    if (coordinates[k] >= d()) throw ConfigError("domain coordinate out of range");
    lo(static_cast<Eigen::Index>(k)) = lower_(static_cast<Eigen::Index>(coordinates[k]));
    hi(static_cast<Eigen::Index>(k)) = upper_(static_cast<Eigen::Index>(coordinates[k]));
  }
  return Domain(std::move(lo), std::move(hi));
}

EvaluationGrid::EvaluationGrid(const Domain& domain, std::vector<std::size_t> per_dim_counts)
    : domain_(domain), counts_(std::move(per_dim_counts)) {
  const std::size_t d = domain_.d();
  if (counts_.size() != d) {
    throw ConfigError("grid needs " + std::to_string(d) + " per-coordinate counts, got " + std::to_string(counts_.size()),
                      "grid");
  }
  std::size_t total = 1;
  for (auto c : counts_) {
    if (c == 0) throw ConfigError("grid counts must be positive", "grid");
    total *= c;
  }
  std::vector<std::vector<double>> axes(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double lo = domain_.lower()(static_cast<Eigen::Index>(j));
    const double hi = domain_.upper()(static_cast<Eigen::Index>(j));
    const std::size_t c = counts_[j];
    if (c == 1) {
      axes[j] = {0.5 * (lo + hi)};
      continue;
    }
    axes[j].resize(c);
    for (std::size_t i = 0; i < c; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(c - 1);
      axes[j][i] = lo + t * (hi - lo);
    }
    axes[j].back() = hi;
  }
  points_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t j = 0; j < d; ++j) points_(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = axes[j][idx[j]];
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < counts_[j]) break;
      idx[j] = 0;
    }
  }
}

EvaluationGrid EvaluationGrid::refined(std::size_t factor) const {
  std::vector<std::size_t> counts;
  for (auto c : counts_) counts.push_back(c == 1 ? 1 : factor * (c - 1) + 1);
  return EvaluationGrid(domain_, std::move(counts));
}

std::vector<std::size_t> default_grid_counts(std::size_t d) {
  if (d == 1) return {201};
  return std::vector<std::size_t>(d, 41);
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset file " + path.string() + " is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv(line);
  std::map<std::string, std::size_t, std::less<>> column_index;
  for (std::size_t c = 0; c < header.size(); ++c) column_index.emplace(std::string(header[c]), c);

  std::vector<std::string> x_names = schema.x_columns;
  if (x_names.empty()) {
    std::vector<std::pair<long, std::string>> found;
    for (const auto& h : header) {
      long k = 0;
      if (is_covariate_name(h, k)) found.emplace_back(k, std::string(h));
    }
    std::sort(found.begin(), found.end());
    for (std::size_t j = 0; j < found.size(); ++j) {
      if (found[j].first != static_cast<long>(j + 1)) throw DataError("missing column x" + std::to_string(j + 1), 0, "x" + std::to_string(j + 1));
      x_names.push_back(found[j].second);
    }
    if (x_names.empty()) throw DataError("missing column x1", 0, "x1");
  }
  std::vector<std::size_t> x_idx;
  for (const auto& name : x_names) {
    auto it = column_index.find(name);
    if (it == column_index.end()) throw DataError("missing column " + name, 0, name);
    x_idx.push_back(it->second);
  }
  auto yit = column_index.find(schema.y_column);
  if (yit == column_index.end()) throw DataError("missing column " + schema.y_column, 0, schema.y_column);
  const std::size_t y_idx = yit->second;

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t row = 0;
  auto parse = [&](const std::vector<std::string_view>& cells, std::size_t col, const std::string& name) {
    if (col >= cells.size() || cells[col].empty()) {
      throw DataError("empty value in column " + name + " at row " + std::to_string(row), row, name);
    }
    const auto cell = cells[col];
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
      throw DataError("invalid number '" + std::string(cell) + "' in column " + name + " at row " + std::to_string(row),
                      row, name);
    }
    return value;
  };
  while (std::getline(in, line)) {
    if (trim_view(line).empty()) continue;
    ++row;
    const auto cells = split_csv(line);
    for (std::size_t j = 0; j < x_idx.size(); ++j) xs.push_back(parse(cells, x_idx[j], x_names[j]));
    ys.push_back(parse(cells, y_idx, schema.y_column));
  }
  if (ys.empty()) throw DataError("dataset file " + path.string() + " has no data rows");
  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto d = static_cast<Eigen::Index>(x_idx.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = xs[static_cast<std::size_t>(i * d + j)];
  }
  return Dataset(std::move(x), Eigen::Map<Eigen::VectorXd>(ys.data(), n));
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  for (std::size_t j = 0; j < data.d(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  const auto& x = data.covariates();
  const auto& y = data.responses();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << format_double(x(i, j)) << ',';
    out << format_double(y(i)) << '\n';
  }
  if (!out) throw DataError("failed writing dataset file " + path.string());
}

std::size_t nearest_rank_index(std::size_t n, double p) {
  // Guard against representation error such as 0.95 * 2000 = 1900.0000000000002.
  const double raw = p * static_cast<double>(n);
  auto rank = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(rank, 1, n);
}

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of empty sample");
  const std::size_t k = nearest_rank_index(values.size(), p) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

Domain default_domain(const Dataset& data, double trim) {
  if (!(trim >= 0.0 && trim < 0.25)) throw ConfigError("trim must lie in [0, 0.25)", "trim");
  if (data.n() < 2) throw DataError("default domain needs at least two observations");
  const auto d = static_cast<Eigen::Index>(data.d());
  Eigen::VectorXd lo(d), hi(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = data.covariates().col(j);
    std::vector<double> v(col.data(), col.data() + col.size());
    lo(j) = nearest_rank_quantile(v, trim);
    hi(j) = nearest_rank_quantile(std::move(v), 1.0 - trim);
    if (!(lo(j) < hi(j))) {
      throw DataError("covariate x" + std::to_string(j + 1) + " is degenerate: trimmed range is a single value", 0,
                      "x" + std::to_string(j + 1));
    }
  }
  return Domain(std::move(lo), std::move(hi));
}

std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw DataError("log returns need at least two prices");
  std::vector<double> out;
  out.reserve(prices.size() - 1);
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
    if (!(prices[i] > 0.0) || !(prices[i + 1] > 0.0)) throw DataError("prices must be positive", i + 1);
    out.push_back(std::log(prices[i + 1]) - std::log(prices[i]));
  }
  return out;
}

Dataset lagged_dataset(std::span<const double> series, std::size_t lags) {
  if (lags == 0 || series.size() <= lags) throw DataError("series too short for the requested lag order");
  const auto n = static_cast<Eigen::Index>(series.size() - lags);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(lags));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i) + lags;
    y(i) = series[t];
    for (std::size_t l = 1; l <= lags; ++l) x(i, static_cast<Eigen::Index>(l - 1)) = series[t - l];
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace sieve
