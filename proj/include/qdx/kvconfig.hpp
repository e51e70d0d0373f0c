#pragma once

// Plain-text key-value configuration:
//
//   # comment
//   [section]
//   key = value        # trailing comments allowed
//
// Keys are addressed as "section.key" (or "key" before any section). Every
// lookup marks the key as used; check_all_used() rejects typos.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace qdx {

class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Accepts "inf" for unbounded quantities.
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or whitespace-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  /// Keys starting with `prefix` (e.g. "tls."), in sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Throws ConfigError naming the first key never read.
  void check_all_used() const;

  /// Canonical "key = value" text, sorted by key; used for hashing.
  std::string canonical() const;
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data);

}  // namespace qdx
