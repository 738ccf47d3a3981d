// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/io_util.hpp"

#include <cmath>
#include <fstream>

namespace deitsp {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericError("refusing to serialize non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(what + ": bad number '" + std::string(s) + "'");
  return v;
}

long parse_long(std::string_view s, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(what + ": bad integer '" + std::string(s) + "'");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failed on " + path.string());
  return content;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError("write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace deitsp
