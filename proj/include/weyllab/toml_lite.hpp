#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace weyllab {

class TomlError : public std::runtime_error {
 public:
  TomlError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses the TOML subset used by run configs: comments, [table] and
/// [dotted.table] headers, bare or quoted keys, basic strings, integers,
/// floats (including inf and nan), booleans, and arrays, which may span lines.
/// Integers stay integers and floats stay floats in the returned object.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json parse_toml_file(const std::string& path);

/// Writes an object of tables back to the same subset. Scalars at the top
/// level come first, then one [table] per nested object, depth first. Floats
/// are written with 17 significant digits and always carry a '.' or exponent.
std::string dump_toml(const nlohmann::json& doc);

std::string format_double(double v);

}  // namespace weyllab
