// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deitsp/tsp.hpp"

namespace deitsp {

// One labeled training/eval example: instance plus its exact optimal tour.
struct DatasetRecord {
  TspInstance instance;
  Tour optimal_tour;
  double optimal_length = 0.0;
};

// Line format (one record per line):
//   n=<int> coords=<x1>,<y1>;<x2>,<y2>;... tour=<i1>,<i2>,... len=<real>
// Reals are written in shortest round-trip form, so rewriting a parsed file
// reproduces it byte for byte. Instances use the float Euclidean metric.
std::string format_dataset_record(const DatasetRecord& rec);
DatasetRecord parse_dataset_record(const std::string& line, int line_no);

void write_dataset(const std::filesystem::path& path,
                   const std::vector<DatasetRecord>& records);
// Validates each record: tour is a permutation and len matches the
// recomputed tour length to 1e-9 (DataError names the line otherwise).
// Instances are named i0000, i0001, ... by position.
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

// count instances of size n, labels from the exact solver (so n <= 16).
// Record k draws its coordinates from stream k of seed, independent of count.
std::vector<DatasetRecord> generate_labeled_dataset(int n, int count,
                                                    std::uint64_t seed);

// One solver outcome on one instance.
struct ResultRecord {
  std::string id;
  std::string method;
  int iterations = 1;
  MetricMode metric = MetricMode::kFloatEuclidean;
  Tour tour;
  double length = 0.0;
  // Unrounded Euclidean length of the same tour; reported alongside the
  // rounded length for rounded-metric instances.
  std::optional<double> length_real;
  // Percent above the reference optimum; absent when no reference is known.
  std::optional<double> gap_percent;
  double seconds = 0.0;
};

// Line format:
//   id=<s> method=<s> iters=<int> metric=<s> tour=<i1>,... len=<real>
//   [len_real=<real>] gap=<real|na> time=<sec, fixed 6 decimals>
std::string format_result_record(const ResultRecord& rec);
ResultRecord parse_result_record(const std::string& line, int line_no);

void write_results(const std::filesystem::path& path,
                   const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results(const std::filesystem::path& path);

}  // namespace deitsp
