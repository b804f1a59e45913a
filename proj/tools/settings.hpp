#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace sieve::cli {

/// Merged run configuration for one subcommand: config file values overlaid
/// by flag values. Values are JSON scalars/arrays or strings in flag syntax;
/// typed getters accept both and throw ConfigError naming the key.
class Settings {
 public:
  Settings(std::string command, std::set<std::string> allowed);

  /// Reads a JSON object from `path`; every key must be allowed for the
  /// command. A "command" key, when present, must name this command.
  void load_file(const std::string& path);
  void set(const std::string& key, nlohmann::json value);

  const std::string& command() const noexcept { return command_; }
  bool has(const std::string& key) const { return values_.contains(key); }

  std::string text(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> text(const std::string& key) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  /// List from a JSON array or a string split on `separator`.
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::size_t> counts(const std::string& key, char separator) const;
  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback) const;
  /// True when the key holds the string "auto" or is absent.
  bool is_auto(const std::string& key) const;

 private:
  const nlohmann::json& at(const std::string& key) const;

  std::string command_;
  std::set<std::string> allowed_;
  nlohmann::json values_ = nlohmann::json::object();
};

std::size_t parse_count(const std::string& text, const std::string& key);
double parse_number(const std::string& text, const std::string& key);
std::uint64_t parse_u64(const std::string& text, const std::string& key);
std::vector<std::string> split(const std::string& text, char separator);

}  // namespace sieve::cli
