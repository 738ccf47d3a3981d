// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace deitsp {

// Written next to every CLI output artifact. The argv field stores the
// fully resolved flag list (defaults and environment fallbacks expanded),
// so re-running it reproduces the artifact without relying on the current
// environment or on defaults staying put.
struct RunManifest {
  std::string version;
  std::string command;
  std::vector<std::string> argv;  // includes the command token, not argv[0]
  std::uint64_t seed = 0;
  std::string started;   // ISO-8601 UTC
  std::string finished;  // ISO-8601 UTC
  std::vector<std::string> outputs;
};

std::string manifest_to_json(const RunManifest& manifest);
// DataError on malformed JSON or missing fields.
RunManifest manifest_from_json(const std::string& text,
                               const std::string& origin = "");

void write_manifest(const std::filesystem::path& path,
                    const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// Sidecar path convention: "<output>.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

std::string current_utc_timestamp();

}  // namespace deitsp
