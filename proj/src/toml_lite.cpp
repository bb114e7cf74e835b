#include "weyllab/toml_lite.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace weyllab {

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        std::vector<std::string> path = key_path(']');
        expect(']');
        end_of_line();
        table = &root;
        for (const auto& k : path) {
          if (table->contains(k) && !(*table)[k].is_object()) fail("key '" + k + "' is not a table");
          table = &(*table)[k];
          if (table->is_null()) *table = nlohmann::json::object();
        }
        continue;
      }
      std::vector<std::string> path = key_path('=');
      expect('=');
      skip_inline_ws();
      nlohmann::json value = parse_value();
      end_of_line();
      nlohmann::json* target = table;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        target = &(*target)[path[i]];
        if (target->is_null()) *target = nlohmann::json::object();
        if (!target->is_object()) fail("key '" + path[i] + "' is not a table");
      }
      if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
      (*target)[path.back()] = std::move(value);
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    int line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) line += s_[i] == '\n' ? 1 : 0;
    throw TomlError(line, what);
  }

  void expect(char c) {
    skip_inline_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
  }

  std::vector<std::string> key_path(char terminator) {
    std::vector<std::string> path;
    while (true) {
      skip_inline_ws();
      if (peek() == '"') {
        path.push_back(parse_string());
      } else {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                          peek() == '-')) {
          ++pos_;
        }
        if (pos_ == start) fail("expected a key");
        path.push_back(s_.substr(start, pos_ - start));
      }
      skip_inline_ws();
      if (peek() == '.') {
        ++pos_;
        continue;
      }
      if (peek() != terminator) fail(std::string("expected '") + terminator + "' after key");
      return path;
    }
  }

  std::string parse_string() {
    ++pos_;  // opening quote
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (eof()) fail("unterminated escape");
      const char e = s_[pos_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    const std::size_t start = pos_;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' &&
           peek() != '\r' && peek() != ' ' && peek() != '\t') {
      ++pos_;
    }
    std::string tok = s_.substr(start, pos_ - start);
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean.push_back(ch);
    }
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    if (clean == "nan" || clean == "+nan" || clean == "-nan") {
      return std::numeric_limits<double>::quiet_NaN();
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(clean, &used);
        if (used != clean.size()) fail("malformed number '" + tok + "'");
        return v;
      }
      const long long v = std::stoll(clean, &used, 10);
      if (used != clean.size()) fail("malformed number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("malformed value '" + tok + "'");
    }
  }

  nlohmann::json parse_array() {
    ++pos_;
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

std::string quote(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) { return bare_key(k) ? k : quote(k); }

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return quote(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += scalar_text(v[i]);
    }
    return out + "]";
  }
  if (v.is_null()) throw std::invalid_argument("dump_toml: null has no TOML form");
  throw std::invalid_argument("dump_toml: tables inside arrays are not supported");
}

void dump_table(const nlohmann::json& t, const std::string& prefix, std::ostringstream& os,
                bool header) {
  if (header) os << "\n[" << prefix << "]\n";
  for (auto it = t.begin(); it != t.end(); ++it) {
    if (!it.value().is_object()) os << key_text(it.key()) << " = " << scalar_text(it.value()) << "\n";
  }
  for (auto it = t.begin(); it != t.end(); ++it) {
    if (it.value().is_object()) {
      const std::string name = prefix.empty() ? key_text(it.key()) : prefix + "." + key_text(it.key());
      dump_table(it.value(), name, os, true);
    }
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

nlohmann::json parse_toml(const std::string& text) { return Parser(text).run(); }

nlohmann::json parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TomlError(0, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

std::string dump_toml(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("dump_toml: document must be a table");
  std::ostringstream os;
  dump_table(doc, "", os, false);
  std::string out = os.str();
  if (!out.empty() && out.front() == '\n') out.erase(0, 1);
  return out;
}

}  // namespace weyllab
