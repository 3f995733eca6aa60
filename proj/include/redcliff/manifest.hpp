#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace redcliff {

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance record written by every artifact-producing command. Input
/// hashes are captured before compute begins; wall_seconds is the only
/// nondeterministic field.
struct RunManifest {
  std::string command;
  std::string config_json;  // snapshot of the effective configuration
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path, crc32 hex
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

void add_input_hash(RunManifest& m, const std::filesystem::path& path);
void write_manifest(const RunManifest& m, const std::filesystem::path& dir);

}  // namespace redcliff
