#include "redcliff/manifest.hpp"

#include <cstdio>

#include "json.hpp"
#include "redcliff/io.hpp"

namespace redcliff {

void add_input_hash(RunManifest& m, const std::filesystem::path& path) {
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08x", crc32_file(path));
  m.input_hashes.emplace_back(path.string(), hex);
}

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["tool_version"] = kToolVersion;
  j["seed"] = m.seed;
  j["config"] = m.config_json.empty() ? nlohmann::ordered_json()
                                      : nlohmann::ordered_json::parse(m.config_json);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& [path, hash] : m.input_hashes) {
    nlohmann::ordered_json e;
    e["path"] = path;
    e["crc32"] = hash;
    inputs.push_back(std::move(e));
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = m.outputs;
  j["wall_seconds"] = m.wall_seconds;
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace redcliff
