#include "settings.hpp"

#include <charconv>
#include <fstream>

#include "sieve/error.hpp"

namespace sieve::cli {

namespace {

std::string trimmed(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t");
  return text.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> split(const std::string& text, char separator) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(separator, start);
    parts.push_back(trimmed(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("expected a nonnegative integer for " + key + ", got '" + text + "'", key);
  }
  return value;
}

double parse_number(const std::string& text, const std::string& key) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("expected a number for " + key + ", got '" + text + "'", key);
  }
  return value;
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("expected an unsigned 64-bit integer for " + key + ", got '" + text + "'", key);
  }
  return value;
}

Settings::Settings(std::string command, std::set<std::string> allowed)
    : command_(std::move(command)), allowed_(std::move(allowed)) {}

void Settings::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, "config");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what(), "config");
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object", "config");
  for (auto& [key, value] : doc.items()) {
    if (key == "command") {
      if (!value.is_string() || value.get<std::string>() != command_) {
        throw ConfigError("config file is for command " + value.dump() + ", not " + command_, "command");
      }
      continue;
    }
    set(key, value);
  }
}

void Settings::set(const std::string& key, nlohmann::json value) {
  if (!allowed_.contains(key)) throw ConfigError("unknown key '" + key + "' for command " + command_, key);
  if (!(value.is_string() || value.is_number() || value.is_array() || value.is_boolean())) {
    throw ConfigError("key '" + key + "' must be a string, number or array", key);
  }
  values_[key] = std::move(value);
}

const nlohmann::json& Settings::at(const std::string& key) const { return values_.at(key); }

std::optional<std::string> Settings::text(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  const auto& v = at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw ConfigError("key '" + key + "' must be a string", key);
}

std::string Settings::text(const std::string& key, const std::string& fallback) const {
  auto v = text(key);
  return v ? *v : fallback;
}

std::size_t Settings::count(const std::string& key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_string()) return parse_count(v.get<std::string>(), key);
  throw ConfigError("key '" + key + "' must be a nonnegative integer", key);
}

double Settings::number(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number(v.get<std::string>(), key);
  throw ConfigError("key '" + key + "' must be a number", key);
}

std::uint64_t Settings::u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_string()) return parse_u64(v.get<std::string>(), key);
  throw ConfigError("key '" + key + "' must be an unsigned integer", key);
}

std::vector<double> Settings::numbers(const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  std::vector<double> out;
  if (v.is_number()) return {v.get<double>()};
  if (v.is_string()) {
    for (const auto& part : split(v.get<std::string>(), ',')) out.push_back(parse_number(part, key));
    return out;
  }
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("key '" + key + "' must list numbers", key);
      out.push_back(e.get<double>());
    }
    return out;
  }
  throw ConfigError("key '" + key + "' must be a number list", key);
}

std::vector<std::size_t> Settings::counts(const std::string& key, char separator) const {
  const auto& v = at(key);
  std::vector<std::size_t> out;
  if (v.is_number_unsigned()) return {v.get<std::size_t>()};
  if (v.is_string()) {
    for (const auto& part : split(v.get<std::string>(), separator)) out.push_back(parse_count(part, key));
    return out;
  }
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError("key '" + key + "' must list nonnegative integers", key);
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }
  throw ConfigError("key '" + key + "' must be an integer list", key);
}

std::vector<std::string> Settings::texts(const std::string& key, std::vector<std::string> fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.is_string()) return split(v.get<std::string>(), ',');
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError("key '" + key + "' must list strings", key);
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  throw ConfigError("key '" + key + "' must be a string or string list", key);
}

bool Settings::is_auto(const std::string& key) const {
  return !has(key) || (at(key).is_string() && at(key).get<std::string>() == "auto");
}

}  // namespace sieve::cli
