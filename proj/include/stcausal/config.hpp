#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace stcausal {

// One parsed right-hand side: a scalar (integer, real, boolean, string) or a
// flat array of scalars. Integers promote to reals on demand.
class ConfigValue {
 public:
  enum class Kind { integer, real, boolean, string, array };

  static ConfigValue make_int(std::int64_t v);
  static ConfigValue make_real(double v);
  static ConfigValue make_bool(bool v);
  static ConfigValue make_string(std::string v);
  static ConfigValue make_array(std::vector<ConfigValue> items);

  Kind kind() const { return kind_; }
  std::int64_t as_int(const std::string& key) const;   // throws ConfigError
  double as_real(const std::string& key) const;        // int promotes
  bool as_bool(const std::string& key) const;
  const std::string& as_string(const std::string& key) const;
  const std::vector<ConfigValue>& items(const std::string& key) const;

  // Round-trippable literal (quoted string, lowered bool, shortest real).
  std::string literal() const;

 private:
  Kind kind_ = Kind::integer;
  std::int64_t int_ = 0;
  double real_ = 0.0;
  bool bool_ = false;
  std::string str_;
  std::vector<ConfigValue> items_;
};

// A declarative `key = value` config in a strict TOML-like subset:
//   # comment lines and trailing comments
//   name = "quoted string"        flag = true
//   count = 12                    width = 0.75
//   grid = [200, 500]             labels = ["a", "b"]
// Keys are dotted identifiers; duplicates are rejected at parse time. Every
// accessor records the key it touched; `reject_unknown()` then fails on any
// key the schema never consumed, naming it and its line.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text,
                         const std::string& origin = "<config>");

  bool has(const std::string& key) const;

  // Required keys: throw ConfigError naming the key when absent.
  std::int64_t require_int(const std::string& key) const;
  double require_real(const std::string& key) const;
  bool require_bool(const std::string& key) const;
  std::string require_string(const std::string& key) const;

  // Optional keys with defaults. Absent keys are still marked consumed.
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  double get_real(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  std::optional<double> get_optional_real(const std::string& key) const;

  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         std::vector<std::int64_t> def) const;
  std::vector<double> get_real_list(const std::string& key,
                                    std::vector<double> def) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::vector<std::string> def) const;
  std::vector<double> require_real_list(const std::string& key) const;

  // All keys sharing a prefix (for families like `region.*`), in file order.
  // Does not mark anything consumed.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Must be called after the schema has consumed everything it understands;
  // throws ConfigError("unknown key ...") for the first untouched key.
  void reject_unknown() const;

  // Every key -> literal, in file order (for the resolved-config manifest).
  std::vector<std::pair<std::string, std::string>> entries() const;

  const std::string& origin() const { return origin_; }
  int line_of(const std::string& key) const;

 private:
  struct Entry {
    ConfigValue value;
    int line = 0;
    int order = 0;
  };
  const Entry& require_entry(const std::string& key) const;
  const Entry* find(const std::string& key) const;

  std::string origin_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace stcausal
