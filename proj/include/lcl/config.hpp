#pragma once

// Flat run configuration. Every tunable has exactly one dotted key with a
// default, a type and a valid range. Precedence: defaults, then the config
// file, then --set overrides.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lcl {

enum class KeyKind { integer, real, text, sizes };

struct KeySpec {
  std::string name;
  KeyKind kind;
  std::string fallback;  // default, as text
  double min = 0.0;      // numeric range (inclusive); ignored for text
  double max = 0.0;
  std::vector<std::string> choices;  // text keys: allowed values (empty = any non-empty)
  std::string help;
};

const std::vector<KeySpec>& config_keys();

class RunConfig {
 public:
  /// All defaults.
  RunConfig();

  /// Parses, range-checks and stores one value. `where` prefixes errors
  /// (e.g. "run.cfg:12").
  void set(const std::string& key, const std::string& value, const std::string& where = "override");

  std::int64_t integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  std::vector<std::size_t> sizes(const std::string& key) const;

  /// key = value lines for every key, in registry order.
  std::string dump() const;
  /// Values as JSON, optionally restricted to keys with one of the prefixes.
  nlohmann::json echo(const std::vector<std::string>& prefixes = {}) const;

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

/// Applies "key = value" lines ('#' starts a comment) on top of `cfg`.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

}  // namespace lcl
