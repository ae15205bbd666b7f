#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sast {

// Flat "key = value" configuration text with optional [section] headers and
// '#' comments. Keys inside a section are addressed as "section.key".
struct KvFile {
  std::map<std::string, std::string> values;
  std::string path;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<long long> get_int_list(const std::string& key) const;
};

KvFile parse_kv_text(const std::string& text, const std::string& path_label);
KvFile parse_kv_file(const std::string& path);

/// Sorted "key = value" lines; the canonical form hashed into config_hash.
std::string canonical_kv(const KvFile& kv);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace sast
