#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace srosync::pipeline {

std::string sha256_hex(std::string_view data);
// Throws kIo if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  struct Output {
    std::string path;    // relative to the output directory
    std::string sha256;
  };
  std::string config_hash;
  std::string software_version;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> conditions;
  std::vector<Output> outputs;
  std::map<std::string, double> summary;
  std::vector<std::string> notes;
};

// JSON text with keys in a fixed order; non-finite summary values become null.
std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

}  // namespace srosync::pipeline
