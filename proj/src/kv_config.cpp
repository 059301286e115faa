#include "demote/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "demote/errors.hpp"

namespace demote {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (cfg.values_.count(key) != 0) {
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": duplicate key " + key);
    }
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KvConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::optional<double> KvConfig::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || ptr != s->data() + s->size()) {
    throw ValidationError(key + ": expected a number, got '" + *s + "'");
  }
  return v;
}

std::optional<std::int64_t> KvConfig::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || ptr != s->data() + s->size()) {
    throw ValidationError(key + ": expected an integer, got '" + *s + "'");
  }
  return v;
}

std::optional<std::vector<int>> KvConfig::get_int_list(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::vector<int> out;
  std::istringstream in(*s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ValidationError(key + ": expected comma-separated integers, got '" + *s + "'");
    }
    out.push_back(v);
  }
  return out;
}

void KvConfig::reject_unconsumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key) == 0) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ValidationError("unknown config keys: " + unknown);
}

std::string format_double(double value) {
  // Shortest representation that round-trips.
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace demote
