// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "deitsp/io_util.hpp"
#include "deitsp/rng.hpp"

namespace deitsp {

namespace {

std::string position_name(size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "i%04zu", idx);
  return buf;
}

// Splits "key=value key=value ..." keeping order; values cannot contain
// spaces in either line format.
std::vector<std::pair<std::string, std::string>> split_fields(
    const std::string& line, const std::string& where) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw DataError(where + ": expected key=value, got '" + tok + "'");
    out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

Tour parse_tour_field(const std::string& value, const std::string& where) {
  Tour t;
  for (const std::string& p : split_on(value, ','))
    t.order.push_back(static_cast<int>(parse_long(p, where + ": tour entry")));
  return t;
}

std::string format_tour_field(const Tour& t) {
  std::string s;
  for (size_t k = 0; k < t.order.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(t.order[k]);
  }
  return s;
}

}  // namespace

std::string format_dataset_record(const DatasetRecord& rec) {
  std::string s = "n=" + std::to_string(rec.instance.size()) + " coords=";
  for (int i = 0; i < rec.instance.size(); ++i) {
    if (i) s += ';';
    s += format_double(rec.instance.node(i).x);
    s += ',';
    s += format_double(rec.instance.node(i).y);
  }
  s += " tour=" + format_tour_field(rec.optimal_tour);
  s += " len=" + format_double(rec.optimal_length);
  return s;
}

DatasetRecord parse_dataset_record(const std::string& line, int line_no) {
  const std::string where = "dataset line " + std::to_string(line_no);
  const auto fields = split_fields(line, where);
  if (fields.size() != 4 || fields[0].first != "n" ||
      fields[1].first != "coords" || fields[2].first != "tour" ||
      fields[3].first != "len")
    throw DataError(where + ": want fields n, coords, tour, len");

  const long n = parse_long(fields[0].second, where + ": n");
  if (n < 3) throw DataError(where + ": n must be >= 3");

  std::vector<Point> pts;
  for (const std::string& pair : split_on(fields[1].second, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos)
      throw DataError(where + ": coord '" + pair + "' is not x,y");
    pts.push_back(Point{parse_double(pair.substr(0, comma), where + ": x"),
                        parse_double(pair.substr(comma + 1), where + ": y")});
  }
  if (static_cast<long>(pts.size()) != n)
    throw DataError(where + ": n=" + std::to_string(n) + " but " +
                    std::to_string(pts.size()) + " coordinates");

  TspInstance inst(std::move(pts), MetricMode::kFloatEuclidean);
  Tour tour = parse_tour_field(fields[2].second, where);
  const double len = parse_double(fields[3].second, where + ": len");

  try {
    validate_tour(inst, tour);
  } catch (const UsageError& e) {
    throw DataError(where + ": " + e.what());
  }
  const double actual = tour_length(inst, tour);
  if (std::abs(actual - len) > 1e-9)
    throw DataError(where + ": len=" + format_double(len) +
                    " but tour measures " + format_double(actual));
  return DatasetRecord{std::move(inst), std::move(tour), len};
}

void write_dataset(const std::filesystem::path& path,
                   const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const DatasetRecord& r : records) {
    out += format_dataset_record(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<DatasetRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    DatasetRecord rec = parse_dataset_record(line, line_no);
    // Re-tag the instance with its position so results can refer to it.
    records.push_back(DatasetRecord{
        TspInstance(rec.instance.nodes(), rec.instance.metric_mode(),
                    position_name(records.size())),
        std::move(rec.optimal_tour), rec.optimal_length});
  }
  return records;
}

std::vector<DatasetRecord> generate_labeled_dataset(int n, int count,
                                                    std::uint64_t seed) {
  if (count < 1) throw UsageError("dataset needs at least one record");
  std::vector<DatasetRecord> records;
  records.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    TspInstance inst = generate_uniform_instance(
        n, mix_seed(seed, static_cast<std::uint64_t>(k)),
        position_name(static_cast<size_t>(k)));
    Tour tour = held_karp(inst);
    const double len = tour_length(inst, tour);
    records.push_back(DatasetRecord{std::move(inst), std::move(tour), len});
  }
  return records;
}

std::string format_result_record(const ResultRecord& rec) {
  std::string s = "id=" + rec.id + " method=" + rec.method +
                  " iters=" + std::to_string(rec.iterations) +
                  " metric=" + metric_mode_name(rec.metric) +
                  " tour=" + format_tour_field(rec.tour) +
                  " len=" + format_double(rec.length);
  if (rec.length_real) s += " len_real=" + format_double(*rec.length_real);
  s += " gap=";
  s += rec.gap_percent ? format_double(*rec.gap_percent) : std::string("na");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", rec.seconds);
  s += " time=";
  s += buf;
  return s;
}

ResultRecord parse_result_record(const std::string& line, int line_no) {
  const std::string where = "results line " + std::to_string(line_no);
  ResultRecord rec;
  bool have_id = false, have_method = false, have_iters = false,
       have_metric = false, have_tour = false, have_len = false,
       have_gap = false, have_time = false;
  for (const auto& [key, value] : split_fields(line, where)) {
    if (key == "id") {
      rec.id = value;
      have_id = true;
    } else if (key == "method") {
      rec.method = value;
      have_method = true;
    } else if (key == "iters") {
      rec.iterations = static_cast<int>(parse_long(value, where + ": iters"));
      have_iters = true;
    } else if (key == "metric") {
      const auto m = metric_mode_from_name(value);
      if (!m) throw DataError(where + ": unknown metric '" + value + "'");
      rec.metric = *m;
      have_metric = true;
    } else if (key == "tour") {
      rec.tour = parse_tour_field(value, where);
      have_tour = true;
    } else if (key == "len") {
      rec.length = parse_double(value, where + ": len");
      have_len = true;
    } else if (key == "len_real") {
      rec.length_real = parse_double(value, where + ": len_real");
    } else if (key == "gap") {
      if (value != "na") rec.gap_percent = parse_double(value, where + ": gap");
      have_gap = true;
    } else if (key == "time") {
      rec.seconds = parse_double(value, where + ": time");
      have_time = true;
    } else {
      throw DataError(where + ": unknown field '" + key + "'");
    }
  }
  if (!(have_id && have_method && have_iters && have_metric && have_tour &&
        have_len && have_gap && have_time))
    throw DataError(where + ": missing required fields");
  return rec;
}

void write_results(const std::filesystem::path& path,
                   const std::vector<ResultRecord>& records) {
  std::string out;
  for (const ResultRecord& r : records) {
    out += format_result_record(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<ResultRecord> read_results(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<ResultRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    records.push_back(parse_result_record(line, line_no));
  }
  return records;
}

}  // namespace deitsp
