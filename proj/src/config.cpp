#include "stcausal/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "stcausal/errors.hpp"
#include "stcausal/io.hpp"

namespace stcausal {

// --- ConfigValue ------------------------------------------------------------

ConfigValue ConfigValue::make_int(std::int64_t v) {
  ConfigValue c;
  c.kind_ = Kind::integer;
  c.int_ = v;
  return c;
}
ConfigValue ConfigValue::make_real(double v) {
  ConfigValue c;
  c.kind_ = Kind::real;
  c.real_ = v;
  return c;
}
ConfigValue ConfigValue::make_bool(bool v) {
  ConfigValue c;
  c.kind_ = Kind::boolean;
  c.bool_ = v;
  return c;
}
ConfigValue ConfigValue::make_string(std::string v) {
  ConfigValue c;
  c.kind_ = Kind::string;
  c.str_ = std::move(v);
  return c;
}
ConfigValue ConfigValue::make_array(std::vector<ConfigValue> items) {
  ConfigValue c;
  c.kind_ = Kind::array;
  c.items_ = std::move(items);
  return c;
}

std::int64_t ConfigValue::as_int(const std::string& key) const {
  if (kind_ != Kind::integer)
    throw ConfigError("key '" + key + "' must be an integer");
  return int_;
}
double ConfigValue::as_real(const std::string& key) const {
  if (kind_ == Kind::integer) return static_cast<double>(int_);
  if (kind_ != Kind::real)
    throw ConfigError("key '" + key + "' must be a number");
  return real_;
}
bool ConfigValue::as_bool(const std::string& key) const {
  if (kind_ != Kind::boolean)
    throw ConfigError("key '" + key + "' must be true or false");
  return bool_;
}
const std::string& ConfigValue::as_string(const std::string& key) const {
  if (kind_ != Kind::string)
    throw ConfigError("key '" + key + "' must be a quoted string");
  return str_;
}
const std::vector<ConfigValue>& ConfigValue::items(const std::string& key) const {
  if (kind_ != Kind::array)
    throw ConfigError("key '" + key + "' must be a [...] list");
  return items_;
}

std::string ConfigValue::literal() const {
  switch (kind_) {
    case Kind::integer:
      return std::to_string(int_);
    case Kind::real:
      return format_double(real_);
    case Kind::boolean:
      return bool_ ? "true" : "false";
    case Kind::string: {
      std::string out = "\"";
      for (char c : str_) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      out.push_back('"');
      return out;
    }
    case Kind::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < items_.size(); ++i) {
        if (i) out += ", ";
        out += items_[i].literal();
      }
      out.push_back(']');
      return out;
    }
  }
  return "";
}

// --- Parsing ----------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_')) return false;
  bool prev_dot = false;
  for (char c : k) {
    if (c == '.') {
      if (prev_dot) return false;
      prev_dot = true;
      continue;
    }
    prev_dot = false;
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return k.back() != '.';
}

struct Cursor {
  const std::string& s;
  std::size_t i = 0;
  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() const { return i >= s.size(); }
  char peek() const { return s[i]; }
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ConfigError(origin + ": line " + std::to_string(line) + ": " + msg);
}

ConfigValue parse_scalar(Cursor& c, const std::string& origin, int line) {
  c.skip_ws();
  if (c.done()) fail(origin, line, "missing value");
  const char ch = c.peek();
  if (ch == '"') {
    ++c.i;
    std::string out;
    while (!c.done() && c.peek() != '"') {
      char d = c.peek();
      if (d == '\\') {
        ++c.i;
        if (c.done()) fail(origin, line, "dangling escape in string");
        d = c.peek();
        if (d != '"' && d != '\\')
          fail(origin, line, std::string("unsupported escape '\\") + d + "'");
      }
      out.push_back(d);
      ++c.i;
    }
    if (c.done()) fail(origin, line, "unterminated string");
    ++c.i;  // closing quote
    return ConfigValue::make_string(std::move(out));
  }
  if (std::isalpha(static_cast<unsigned char>(ch))) {
    std::string word;
    while (!c.done() && std::isalpha(static_cast<unsigned char>(c.peek())))
      word.push_back(c.s[c.i++]);
    if (word == "true") return ConfigValue::make_bool(true);
    if (word == "false") return ConfigValue::make_bool(false);
    fail(origin, line,
         "bare word '" + word + "' (strings must be quoted; booleans are "
         "true/false)");
  }
  // number: integer when it parses fully as one, else double
  std::size_t start = c.i;
  while (!c.done() && (std::isdigit(static_cast<unsigned char>(c.peek())) ||
                       c.peek() == '+' || c.peek() == '-' || c.peek() == '.' ||
                       c.peek() == 'e' || c.peek() == 'E'))
    ++c.i;
  const std::string tok = c.s.substr(start, c.i - start);
  if (tok.empty()) fail(origin, line, std::string("unexpected character '") + ch + "'");
  {
    std::int64_t iv = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
    if (res.ec == std::errc{} && res.ptr == tok.data() + tok.size())
      return ConfigValue::make_int(iv);
  }
  double dv = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), dv);
  if (res.ec == std::errc{} && res.ptr == tok.data() + tok.size())
    return ConfigValue::make_real(dv);
  fail(origin, line, "malformed number '" + tok + "'");
}

ConfigValue parse_value(Cursor& c, const std::string& origin, int line) {
  c.skip_ws();
  if (c.done()) fail(origin, line, "missing value");
  if (c.peek() != '[') return parse_scalar(c, origin, line);
  ++c.i;  // '['
  std::vector<ConfigValue> items;
  c.skip_ws();
  if (!c.done() && c.peek() == ']') {
    ++c.i;
    return ConfigValue::make_array(std::move(items));
  }
  for (;;) {
    items.push_back(parse_scalar(c, origin, line));
    c.skip_ws();
    if (c.done()) fail(origin, line, "unterminated [...] list");
    if (c.peek() == ',') {
      ++c.i;
      continue;
    }
    if (c.peek() == ']') {
      ++c.i;
      break;
    }
    fail(origin, line, std::string("expected ',' or ']' in list, got '") + c.peek() +
                           "'");
  }
  return ConfigValue::make_array(std::move(items));
}

// Strips a trailing comment that starts outside any quoted string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && in_str) {
      ++i;
      continue;
    }
    if (c == '"') in_str = !in_str;
    if (c == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text, const std::string& origin) {
  ConfigMap m;
  m.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  int order = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key))
      fail(origin, line_no, "invalid key '" + key + "'");
    if (m.entries_.count(key))
      fail(origin, line_no,
           "duplicate key '" + key + "' (first set on line " +
               std::to_string(m.entries_[key].line) + ")");
    const std::string rhs = line.substr(eq + 1);
    Cursor c{rhs, 0};
    ConfigValue v = parse_value(c, origin, line_no);
    c.skip_ws();
    if (!c.done())
      fail(origin, line_no,
           "trailing characters after value: '" + rhs.substr(c.i) + "'");
    m.entries_[key] = Entry{std::move(v), line_no, order++};
  }
  return m;
}

// --- Accessors --------------------------------------------------------------

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const ConfigMap::Entry& ConfigMap::require_entry(const std::string& key) const {
  const Entry* e = find(key);
  if (!e)
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
  consumed_.insert(key);
  return *e;
}

bool ConfigMap::has(const std::string& key) const { return find(key) != nullptr; }

std::int64_t ConfigMap::require_int(const std::string& key) const {
  return require_entry(key).value.as_int(key);
}
double ConfigMap::require_real(const std::string& key) const {
  return require_entry(key).value.as_real(key);
}
bool ConfigMap::require_bool(const std::string& key) const {
  return require_entry(key).value.as_bool(key);
}
std::string ConfigMap::require_string(const std::string& key) const {
  return require_entry(key).value.as_string(key);
}

std::int64_t ConfigMap::get_int(const std::string& key, std::int64_t def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  return e ? e->value.as_int(key) : def;
}
double ConfigMap::get_real(const std::string& key, double def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  return e ? e->value.as_real(key) : def;
}
bool ConfigMap::get_bool(const std::string& key, bool def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  return e ? e->value.as_bool(key) : def;
}
std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  return e ? e->value.as_string(key) : def;
}
std::optional<double> ConfigMap::get_optional_real(const std::string& key) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value.as_real(key);
}

std::vector<std::int64_t> ConfigMap::get_int_list(
    const std::string& key, std::vector<std::int64_t> def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  if (!e) return def;
  std::vector<std::int64_t> out;
  for (const ConfigValue& v : e->value.items(key)) out.push_back(v.as_int(key));
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' must not be an empty list");
  return out;
}
std::vector<double> ConfigMap::get_real_list(const std::string& key,
                                             std::vector<double> def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  if (!e) return def;
  std::vector<double> out;
  for (const ConfigValue& v : e->value.items(key)) out.push_back(v.as_real(key));
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' must not be an empty list");
  return out;
}
std::vector<std::string> ConfigMap::get_string_list(
    const std::string& key, std::vector<std::string> def) const {
  consumed_.insert(key);
  const Entry* e = find(key);
  if (!e) return def;
  std::vector<std::string> out;
  for (const ConfigValue& v : e->value.items(key)) out.push_back(v.as_string(key));
  return out;
}
std::vector<double> ConfigMap::require_real_list(const std::string& key) const {
  const Entry& e = require_entry(key);
  std::vector<double> out;
  for (const ConfigValue& v : e.value.items(key)) out.push_back(v.as_real(key));
  if (out.empty())
    throw ConfigError(origin_ + ": key '" + key + "' must not be an empty list");
  return out;
}

std::vector<std::string> ConfigMap::keys_with_prefix(
    const std::string& prefix) const {
  std::vector<std::pair<int, std::string>> hits;
  for (const auto& [key, entry] : entries_)
    if (key.rfind(prefix, 0) == 0) hits.push_back({entry.order, key});
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> out;
  for (auto& [order, key] : hits) out.push_back(std::move(key));
  return out;
}

void ConfigMap::reject_unknown() const {
  // Report in file order so the first surprise in the file is named first.
  const Entry* worst = nullptr;
  const std::string* worst_key = nullptr;
  for (const auto& [key, entry] : entries_) {
    if (consumed_.count(key)) continue;
    if (!worst || entry.order < worst->order) {
      worst = &entry;
      worst_key = &key;
    }
  }
  if (worst)
    throw ConfigError(origin_ + ": line " + std::to_string(worst->line) +
                      ": unknown key '" + *worst_key + "'");
}

std::vector<std::pair<std::string, std::string>> ConfigMap::entries() const {
  std::vector<std::pair<int, std::pair<std::string, std::string>>> tmp;
  for (const auto& [key, entry] : entries_)
    tmp.push_back({entry.order, {key, entry.value.literal()}});
  std::sort(tmp.begin(), tmp.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& [order, kv] : tmp) out.push_back(std::move(kv));
  return out;
}

int ConfigMap::line_of(const std::string& key) const {
  const Entry* e = find(key);
  return e ? e->line : 0;
}

}  // namespace stcausal
