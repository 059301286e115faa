#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace demote {

// Flat key=value configuration. Blank lines and lines starting with '#' are
// ignored; whitespace around keys and values is trimmed. Every getter marks
// its key as consumed so callers can reject unknown keys afterwards.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::vector<int>> get_int_list(const std::string& key) const;

  // Throws ValidationError naming every key never read by a getter.
  void reject_unconsumed() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

std::string format_double(double value);

}  // namespace demote
