// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <filesystem>
#include <string>
#include <string_view>

#include "deitsp/errors.hpp"

namespace deitsp {

// Shortest decimal form that round-trips the exact double. Used everywhere a
// real number is serialized so that write(read(x)) is byte-identical.
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& what);
long parse_long(std::string_view s, const std::string& what);

std::string read_file(const std::filesystem::path& path);

// Writes to <path>.tmp in the same directory, then renames over path, so a
// crash never leaves a half-written artifact.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace deitsp
