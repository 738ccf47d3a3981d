// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/tsplib.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "deitsp/io_util.hpp"

namespace deitsp {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// "KEY : value" / "KEY: value" / "KEY". Returns false for non-header lines.
bool split_header(const std::string& line, std::string& key,
                  std::string& value) {
  const auto colon = line.find(':');
  std::string head = trim(colon == std::string::npos ? line : line.substr(0, colon));
  if (head.empty()) return false;
  for (char c : head)
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '_') return false;
  key = head;
  value = colon == std::string::npos ? "" : trim(line.substr(colon + 1));
  return true;
}

}  // namespace

TspInstance parse_tsplib(const std::string& text, const std::string& origin) {
  const std::string where = origin.empty() ? "tsplib input" : origin;
  std::istringstream in(text);
  std::string line;
  std::string name;
  long dimension = -1;
  std::string weight_type;
  bool in_coords = false;
  std::map<long, Point> coords;

  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "EOF") break;

    if (!in_coords) {
      std::string key, value;
      if (!split_header(t, key, value))
        throw DataError(where + ": unrecognized line '" + t + "'");
      if (key == "NAME") {
        name = value;
      } else if (key == "TYPE") {
        if (value != "TSP")
          throw UnsupportedFormatError(where + ": TYPE '" + value +
                                       "' not supported (want TSP)");
      } else if (key == "DIMENSION") {
        dimension = parse_long(value, where + ": DIMENSION");
      } else if (key == "EDGE_WEIGHT_TYPE") {
        weight_type = value;
      } else if (key == "NODE_COORD_SECTION") {
        in_coords = true;
      } else if (key == "COMMENT" || key == "DISPLAY_DATA_TYPE") {
        // informational
      } else if (key == "EDGE_WEIGHT_SECTION" || key == "DISPLAY_DATA_SECTION") {
        throw UnsupportedFormatError(where + ": section " + key +
                                     " not supported");
      } else {
        throw DataError(where + ": unknown header '" + key + "'");
      }
      continue;
    }

    // index x y
    std::istringstream ls(t);
    std::string si, sx, sy, extra;
    ls >> si >> sx >> sy;
    if (!ls || (ls >> extra && !extra.empty()))
      throw DataError(where + ": bad coord line '" + t + "'");
    const long idx = parse_long(si, where + ": node index");
    if (coords.count(idx))
      throw DataError(where + ": duplicate node index " + std::to_string(idx));
    coords[idx] = Point{parse_double(sx, where + ": x coordinate"),
                        parse_double(sy, where + ": y coordinate")};
  }

  if (!in_coords) throw DataError(where + ": missing NODE_COORD_SECTION");
  if (dimension < 0) throw DataError(where + ": missing DIMENSION");
  if (weight_type.empty())
    throw DataError(where + ": missing EDGE_WEIGHT_TYPE");
  if (weight_type != "EUC_2D")
    throw UnsupportedFormatError(where + ": EDGE_WEIGHT_TYPE '" + weight_type +
                                 "' not supported (want EUC_2D)");
  if (static_cast<long>(coords.size()) != dimension)
    throw DataError(where + ": DIMENSION says " + std::to_string(dimension) +
                    " nodes, found " + std::to_string(coords.size()));

  std::vector<Point> pts;
  pts.reserve(coords.size());
  long expect = 1;
  for (const auto& [idx, p] : coords) {
    if (idx != expect)
      throw DataError(where + ": node indices must be 1..n, missing " +
                      std::to_string(expect));
    pts.push_back(p);
    ++expect;
  }
  return TspInstance(std::move(pts), MetricMode::kTsplibEuc2dRounded, name);
}

TspInstance load_tsplib_file(const std::filesystem::path& path) {
  return parse_tsplib(read_file(path), path.filename().string());
}

std::optional<double> known_optimum(const std::string& instance_name) {
  static const std::map<std::string, double> table = {
      {"berlin52", 7542},  {"bier127", 118282}, {"ch130", 6110},
      {"ch150", 6528},     {"eil101", 629},     {"eil51", 426},
      {"eil76", 538},      {"kroA100", 21282},  {"kroA150", 26524},
      {"kroA200", 29368},  {"kroB100", 22141},  {"kroB150", 26130},
      {"kroB200", 29437},  {"kroC100", 20749},  {"kroD100", 21294},
      {"kroE100", 22068},  {"lin105", 14379},   {"pr107", 44303},
      {"pr124", 59030},    {"pr136", 96772},    {"pr144", 58537},
      {"pr152", 73682},    {"pr76", 108159},    {"rat195", 2323},
      {"rat99", 1211},     {"st70", 675},
  };
  const auto it = table.find(instance_name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

}  // namespace deitsp
