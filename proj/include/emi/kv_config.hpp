#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emi {

/// Sectioned key-value document in a TOML subset:
///
///   # comment
///   [training]
///   learning_rate = 2e-4
///   modalities = "text,audio"
///
/// Values are kept as text; typed getters validate on access.
class KvDocument {
 public:
  static KvDocument parse(std::string_view text, const std::string& origin = "<config>");
  static KvDocument load(const std::filesystem::path& path);

  bool has(std::string_view section, std::string_view key) const;
  void set(const std::string& section, const std::string& key, std::string value);

  std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  long long get_int(std::string_view section, std::string_view key, long long fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;

  /// Fails on any key in `section` that is not in `known`.
  void expect_keys(std::string_view section, const std::vector<std::string_view>& known) const;
  std::vector<std::string> sections() const;

  /// Canonical text: sections and keys sorted, strings quoted.
  std::string serialize() const;

  bool operator==(const KvDocument& other) const { return sections_ == other.sections_; }

 private:
  const std::string* find(std::string_view section, std::string_view key) const;
  std::map<std::string, std::map<std::string, std::string, std::less<>>, std::less<>> sections_;
  std::string origin_;
};

/// Shortest decimal text that parses back to exactly `v` ("inf" for infinity).
std::string format_double(double v);

}  // namespace emi
