#include "emi/kv_config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "emi/errors.hpp"

namespace emi {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_bare_key(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

KvDocument KvDocument::parse(std::string_view text, const std::string& origin) {
  KvDocument doc;
  doc.origin_ = origin;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto fail = [&](const std::string& what) {
      return ConfigError(origin + ":" + std::to_string(line_no) + ": " + what);
    };

    // Strip comments outside of quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      section = std::string(strip(line.substr(1, line.size() - 2)));
      if (!is_bare_key(section)) throw fail("bad section name '" + section + "'");
      doc.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    const std::string key(strip(line.substr(0, eq)));
    std::string_view raw = strip(line.substr(eq + 1));
    if (!is_bare_key(key)) throw fail("bad key '" + key + "'");
    if (section.empty()) throw fail("key '" + key + "' outside of any [section]");
    std::string value;
    if (!raw.empty() && raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') throw fail("unterminated string for '" + key + "'");
      value = std::string(raw.substr(1, raw.size() - 2));
    } else {
      if (raw.empty()) throw fail("missing value for '" + key + "'");
      value = std::string(raw);
    }
    auto& entries = doc.sections_[section];
    if (entries.count(key)) throw fail("duplicate key '" + key + "'");
    entries.emplace(key, std::move(value));
    if (end == text.size()) break;
  }
  return doc;
}

KvDocument KvDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

const std::string* KvDocument::find(std::string_view section, std::string_view key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

bool KvDocument::has(std::string_view section, std::string_view key) const { return find(section, key) != nullptr; }

void KvDocument::set(const std::string& section, const std::string& key, std::string value) {
  sections_[section][key] = std::move(value);
}

std::string KvDocument::get_string(std::string_view section, std::string_view key, std::string fallback) const {
  const auto* v = find(section, key);
  return v ? *v : fallback;
}

double KvDocument::get_double(std::string_view section, std::string_view key, double fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  if (*v == "inf" || *v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(origin_ + ": [" + std::string(section) + "] " + std::string(key) + " = '" + *v +
                      "' is not a number");
  }
  return out;
}

long long KvDocument::get_int(std::string_view section, std::string_view key, long long fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(origin_ + ": [" + std::string(section) + "] " + std::string(key) + " = '" + *v +
                      "' is not an integer");
  }
  return out;
}

bool KvDocument::get_bool(std::string_view section, std::string_view key, bool fallback) const {
  const auto* v = find(section, key);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  throw ConfigError(origin_ + ": [" + std::string(section) + "] " + std::string(key) + " must be true or false");
}

void KvDocument::expect_keys(std::string_view section, const std::vector<std::string_view>& known) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return;
  for (const auto& [key, value] : s->second) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw ConfigError(origin_ + ": unknown key '" + key + "' in [" + std::string(section) + "]");
  }
}

std::vector<std::string> KvDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, entries] : sections_) out.push_back(name);
  return out;
}

std::string KvDocument::serialize() const {
  std::string out;
  for (const auto& [name, entries] : sections_) {
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [key, value] : entries) {
      bool bare = !value.empty();
      for (char c : value) {
        bare = bare && (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+');
      }
      out += key + " = " + (bare ? value : "\"" + value + "\"") + "\n";
    }
  }
  return out;
}

}  // namespace emi
