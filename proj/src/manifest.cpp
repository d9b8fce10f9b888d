#include "detkit/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

std::uint64_t fnv64_bytes(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string fnv64_digest(const std::filesystem::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h = fnv64_bytes(f.filename().string(), h);
      h = fnv64_bytes(read_file_bytes(f), h);
    }
  } else {
    h = fnv64_bytes(read_file_bytes(path), h);
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), fnv64_digest(path));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["version"] = version;
  j["seed"] = seed;
  j["threads"] = threads;
  j["config"] = config;
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& [path, digest] : inputs)
    ins.push_back({{"path", path}, {"digest", digest}});
  j["inputs"] = std::move(ins);
  j["outputs"] = outputs;
  j["wall_time_s"] = wall_time_s;
  j["timestamp"] = timestamp;
  return j.dump(2);
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << to_json() << "\n";
}

}  // namespace detkit
