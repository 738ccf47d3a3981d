// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "deitsp/tsp.hpp"

namespace deitsp {

// Parses the subset of TSPLIB needed for symmetric EUC_2D benchmarks:
// NAME / TYPE / COMMENT / DIMENSION / EDGE_WEIGHT_TYPE headers (colon
// optional), NODE_COORD_SECTION with 1-based indices, optional EOF line.
// Any other EDGE_WEIGHT_TYPE raises UnsupportedFormatError; structural
// problems (bad dimension, duplicate/missing nodes) raise DataError.
// The returned instance uses the rounded EUC_2D metric.
TspInstance parse_tsplib(const std::string& text,
                         const std::string& origin = "");

TspInstance load_tsplib_file(const std::filesystem::path& path);

// Published optimal tour lengths (rounded EUC_2D metric) for the bundled
// benchmark set; nullopt for unknown names.
std::optional<double> known_optimum(const std::string& instance_name);

}  // namespace deitsp
