#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meflab/error.hpp"
#include "meflab/io.hpp"

// A deliberately small TOML subset: [section] headers, key = value pairs,
// strings, integers, floats, booleans, flat arrays, and # comments. That is
// exactly what experiment definitions need; anything fancier in a config
// file is almost certainly a typo and is rejected with a line number.
namespace meflab::toml {

struct Value {
  enum class Kind { String, Int, Float, Bool, Array };
  Kind kind = Kind::String;
  std::string str;
  std::int64_t i = 0;
  double f = 0;
  bool b = false;
  std::vector<Value> arr;

  const std::string& as_string() const {
    require(kind == Kind::String, "config: expected a string value");
    return str;
  }
  std::int64_t as_int() const {
    require(kind == Kind::Int, "config: expected an integer value");
    return i;
  }
  double as_float() const {
    if (kind == Kind::Int) return static_cast<double>(i);
    require(kind == Kind::Float, "config: expected a numeric value");
    return f;
  }
  bool as_bool() const {
    require(kind == Kind::Bool, "config: expected a boolean value");
    return b;
  }
  const std::vector<Value>& as_array() const {
    require(kind == Kind::Array, "config: expected an array value");
    return arr;
  }
  std::size_t as_size() const {
    std::int64_t v = as_int();
    require(v >= 0, "config: expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }
};

using Section = std::map<std::string, Value>;

struct Table {
  std::map<std::string, Section> sections;  // "" is the root section

  bool has(const std::string& section) const { return sections.contains(section); }

  const Section& at(const std::string& section) const {
    auto it = sections.find(section);
    require(it != sections.end(), "config: missing [" + section + "] section");
    return it->second;
  }
};

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Removes a trailing comment, honoring quoted strings.
inline std::string drop_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

inline std::string parse_string(const std::string& raw, int line) {
  require(raw.size() >= 2 && raw.front() == '"' && raw.back() == '"',
          "config line " + std::to_string(line) + ": malformed string " + raw);
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    ++i;
    require(i + 1 <= raw.size() - 1, "config line " + std::to_string(line) +
                                         ": dangling escape in " + raw);
    switch (raw[i]) {
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      default:
        fail("config line " + std::to_string(line) + ": unsupported escape \\" +
             std::string(1, raw[i]));
    }
  }
  return out;
}

inline Value parse_value(const std::string& raw, int line);

inline Value parse_array(const std::string& raw, int line) {
  require(raw.size() >= 2 && raw.front() == '[' && raw.back() == ']',
          "config line " + std::to_string(line) + ": malformed array " + raw);
  Value v;
  v.kind = Value::Kind::Array;
  std::string body = raw.substr(1, raw.size() - 2);
  // split on commas outside quotes
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (in_str) {
      cur.push_back(c);
      if (c == '\\' && i + 1 < body.size()) cur.push_back(body[++i]);
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
      cur.push_back(c);
    } else if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!strip(cur).empty()) parts.push_back(cur);
  for (const std::string& p : parts) {
    std::string t = strip(p);
    require(!t.empty(), "config line " + std::to_string(line) + ": empty array element");
    v.arr.push_back(parse_value(t, line));
  }
  return v;
}

inline Value parse_value(const std::string& raw, int line) {
  Value v;
  if (raw.front() == '"') {
    v.kind = Value::Kind::String;
    v.str = parse_string(raw, line);
    return v;
  }
  if (raw.front() == '[') return parse_array(raw, line);
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::Bool;
    v.b = raw == "true";
    return v;
  }
  // integer?
  {
    std::int64_t i = 0;
    const char* b = raw.data();
    const char* e = raw.data() + raw.size();
    auto [p, ec] = std::from_chars(b, e, i);
    if (ec == std::errc() && p == e) {
      v.kind = Value::Kind::Int;
      v.i = i;
      return v;
    }
  }
  // float?
  {
    double f = 0;
    const char* b = raw.data();
    const char* e = raw.data() + raw.size();
    auto [p, ec] = std::from_chars(b, e, f);
    if (ec == std::errc() && p == e) {
      v.kind = Value::Kind::Float;
      v.f = f;
      return v;
    }
  }
  fail("config line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
}

}  // namespace detail

inline Table parse(const std::string& text) {
  Table t;
  std::string section;
  t.sections[""];
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::strip(detail::drop_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2,
              "config line " + std::to_string(line_no) + ": malformed section header");
      section = detail::strip(line.substr(1, line.size() - 2));
      require(!section.empty(), "config line " + std::to_string(line_no) + ": empty section name");
      require(!t.sections.contains(section),
              "config line " + std::to_string(line_no) + ": duplicate section [" + section + "]");
      t.sections[section];
      continue;
    }
    std::size_t eq = line.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::strip(line.substr(0, eq));
    std::string raw = detail::strip(line.substr(eq + 1));
    require(!key.empty() && !raw.empty(),
            "config line " + std::to_string(line_no) + ": expected key = value");
    require(!t.sections[section].contains(key), "config line " + std::to_string(line_no) +
                                                    ": duplicate key '" + key + "'");
    t.sections[section][key] = detail::parse_value(raw, line_no);
  }
  return t;
}

inline Table parse_file(const std::string& path) { return parse(io::read_file(path)); }

}  // namespace meflab::toml
