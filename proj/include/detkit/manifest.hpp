#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace detkit {

// Reproducibility record written alongside every CLI output. All fields are
// deterministic for identical inputs except timestamp and wall_time_s.
struct RunManifest {
  std::string subcommand;
  std::string version;
  std::uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, std::string> config;  // resolved flag values
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, digest)
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;
  std::string timestamp;

  void add_input(const std::filesystem::path& path);
  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

// FNV-1a 64-bit digest of a file or directory tree (sorted file order),
// rendered as 16 hex digits.
std::string fnv64_digest(const std::filesystem::path& path);

std::string current_timestamp();

}  // namespace detkit
