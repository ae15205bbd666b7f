#include "sast/kv_file.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sast/types.hpp"

namespace sast {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(s);
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void missing_key(const KvFile& kv, const std::string& key) {
  throw std::invalid_argument(kv.path + ": missing required key '" + key + "'");
}

[[noreturn]] void bad_value(const KvFile& kv, const std::string& key, const std::string& want) {
  throw std::invalid_argument(kv.path + ": key '" + key + "' = '" + kv.values.at(key) +
                              "' is not a valid " + want);
}

}  // namespace

std::string KvFile::get_string(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) missing_key(*this, key);
  return it->second;
}

std::string KvFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

long long KvFile::get_int(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(raw, &pos);
    if (pos != raw.size()) bad_value(*this, key, "integer");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(*this, key, "integer");
  } catch (const std::out_of_range&) {
    bad_value(*this, key, "integer");
  }
}

long long KvFile::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvFile::get_double(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) bad_value(*this, key, "number");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(*this, key, "number");
  } catch (const std::out_of_range&) {
    bad_value(*this, key, "number");
  }
}

double KvFile::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::vector<double> KvFile::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      bad_value(*this, key, "comma-separated number list");
    }
  }
  if (out.empty()) bad_value(*this, key, "comma-separated number list");
  return out;
}

std::vector<long long> KvFile::get_int_list(const std::string& key) const {
  std::vector<long long> out;
  for (const auto& item : split_list(get_string(key))) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      bad_value(*this, key, "comma-separated integer list");
    }
  }
  if (out.empty()) bad_value(*this, key, "comma-separated integer list");
  return out;
}

KvFile parse_kv_text(const std::string& text, const std::string& path_label) {
  KvFile kv;
  kv.path = path_label;
  std::istringstream stream(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(stream, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw MalformedFile(path_label + ":" + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw MalformedFile(path_label + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw MalformedFile(path_label + ":" + std::to_string(lineno) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.values.count(full)) {
      throw MalformedFile(path_label + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    }
    kv.values[full] = value;
  }
  return kv;
}

KvFile parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedFile("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_kv_text(buffer.str(), path);
}

std::string canonical_kv(const KvFile& kv) {
  std::string out;
  for (const auto& [key, value] : kv.values) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace sast
