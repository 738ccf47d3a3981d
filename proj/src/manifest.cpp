// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/manifest.hpp"

#include <ctime>

#include "deitsp/errors.hpp"
#include "deitsp/io_util.hpp"
#include "json.hpp"

namespace deitsp {

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::json j;
  j["version"] = manifest.version;
  j["command"] = manifest.command;
  j["argv"] = manifest.argv;
  j["seed"] = manifest.seed;
  j["started"] = manifest.started;
  j["finished"] = manifest.finished;
  j["outputs"] = manifest.outputs;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text,
                               const std::string& origin) {
  const std::string where = origin.empty() ? "manifest" : origin;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where + ": " + e.what());
  }
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest) {
  write_file_atomic(path, manifest_to_json(manifest));
}

RunManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path), path.string());
}

std::filesystem::path manifest_path_for(
    const std::filesystem::path& output) {
  std::filesystem::path p = output;
  p += ".manifest.json";
  return p;
}

std::string current_utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace deitsp
