#pragma once

#include <stdexcept>
#include <string>

namespace sieve {

/// Broad failure category. The CLI maps each kind onto an exit status.
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Invalid configuration: bad parameter, unknown key, inconsistent options.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(ErrorKind::config, what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed or unusable input data. Row/column are 1-based, 0 when not applicable.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t row = 0, std::string column = {})
      : Error(ErrorKind::data, what), row_(row), column_(std::move(column)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// Argument outside the region where a function is defined.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Design matrix has no in-domain rows.
class EmptyDesignError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Design matrix is rank deficient. `window` is the 0-based block index for
/// rolling-window fits, or -1 for a full-sample fit.
class SingularDesignError : public NumericError {
 public:
  SingularDesignError(const std::string& what, double smallest_singular_value, long window = -1)
      : NumericError(what), sigma_min_(smallest_singular_value), window_(window) {}
  double smallest_singular_value() const noexcept { return sigma_min_; }
  long window() const noexcept { return window_; }

 private:
  double sigma_min_;
  long window_;
};

}  // namespace sieve
