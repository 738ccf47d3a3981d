// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container. Layout (all integers little-endian uint32, doubles
// raw little-endian IEEE 754):
//   8 bytes  magic "DTSPCKP1"
//   u32      meta count, then per entry: u32 key len, key, u32 val len, val
//   u32      param count, then per param:
//            u32 name len, name, u32 rank, u32 dims..., f64 payload
// Writing the result of load_checkpoint reproduces the file byte for byte.
#include <cstring>

#include "deitsp/io_util.hpp"
#include "deitsp/tensor.hpp"

namespace deitsp {

namespace {

constexpr char kMagic[8] = {'D', 'T', 'S', 'P', 'C', 'K', 'P', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string where;

  void need_bytes(size_t n) {
    if (pos + n > buf.size())
      throw DataError(where + ": truncated checkpoint");
  }
  std::uint32_t u32() {
    need_bytes(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need_bytes(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& meta,
    const ParameterStore& params) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& [name, t] : params.items()) {
    put_str(out, name);
    const Shape& s = t.shape();
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    for (int d : s) put_u32(out, static_cast<std::uint32_t>(d));
    const auto& data = t.data();
    const size_t bytes = data.size() * sizeof(double);
    const size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, data.data(), bytes);
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path.filename().string()};
  r.need_bytes(sizeof kMagic);
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw DataError(r.where + ": not a checkpoint file");
  r.pos = sizeof kMagic;

  Checkpoint ck;
  const std::uint32_t nmeta = r.u32();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    ck.meta.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t nparams = r.u32();
  for (std::uint32_t i = 0; i < nparams; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError(r.where + ": implausible tensor rank");
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k)
      shape.push_back(static_cast<int>(r.u32()));
    const auto n = static_cast<size_t>(shape_numel(shape));
    r.need_bytes(n * sizeof(double));
    std::vector<double> data(n);
    std::memcpy(data.data(), buf.data() + r.pos, n * sizeof(double));
    r.pos += n * sizeof(double);
    ck.params.add(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  if (r.pos != buf.size())
    throw DataError(r.where + ": trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace deitsp
