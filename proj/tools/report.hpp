#pragma once

// Tabular report emission for the CLI. Every value is formatted here so the
// same inputs always produce the same bytes.

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace report {

// monostate is a missing value: empty in CSV, null in JSON.
using Cell = std::variant<std::monostate, std::string, std::int64_t, std::uint64_t, double>;

inline std::string format(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return {};
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return std::to_string(*u);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", std::get<double>(c));
  return buf;
}

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Tables separated by a blank line, each preceded by "# name".
inline void write_csv(std::ostream& os, const std::vector<Table>& tables) {
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (t > 0) os << '\n';
    if (tables.size() > 1) os << "# " << tables[t].name << '\n';
    const auto& tab = tables[t];
    for (std::size_t i = 0; i < tab.columns.size(); ++i) os << (i ? "," : "") << csv_field(tab.columns[i]);
    os << '\n';
    for (const auto& row : tab.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(format(row[i]));
      os << '\n';
    }
  }
}

// {"name": [{col: value, ...}, ...], ...} with columns in declared order.
inline void write_json(std::ostream& os, const std::vector<Table>& tables) {
  os << "{\n";
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& tab = tables[t];
    os << "  " << nlohmann::json(tab.name).dump() << ": [";
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
      os << (r ? ",\n    {" : "\n    {");
      for (std::size_t i = 0; i < tab.columns.size(); ++i) {
        os << (i ? ", " : "") << nlohmann::json(tab.columns[i]).dump() << ": ";
        const Cell& c = tab.rows[r][i];
        if (std::holds_alternative<std::string>(c)) {
          os << nlohmann::json(std::get<std::string>(c)).dump();
        } else if (std::holds_alternative<std::monostate>(c)) {
          os << "null";
        } else {
          os << format(c);
        }
      }
      os << "}";
    }
    os << (tab.rows.empty() ? "]" : "\n  ]") << (t + 1 < tables.size() ? ",\n" : "\n");
  }
  os << "}\n";
}

}  // namespace report
