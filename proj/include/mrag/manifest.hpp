#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mrag/contrastive.hpp"
#include "mrag/core.hpp"
#include "mrag/error.hpp"
#include "mrag/hash.hpp"
#include "mrag/index.hpp"
#include "mrag/prompts.hpp"

namespace mrag {

inline constexpr const char* kVersion = "0.3.0";

/// Describes one CLI run well enough to reproduce it.
struct RunManifest {
  std::vector<std::string> command_line;
  std::map<std::string, std::string> config_hashes;  // path -> fnv1a64 of contents
  std::map<std::string, std::string> prompt_hashes;  // template name -> fnv1a64
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> endpoints;       // role -> backend identity
  std::map<std::string, std::string> artifacts;       // role -> path
  std::map<std::string, std::string> artifact_versions{
      {"MRLE", std::to_string(kEmbeddingFileVersion)},
      {"MRLH", std::to_string(ProjectionHead::kFormatVersion)},
      {"MRLX", std::to_string(DenseIndex::kFormatVersion)},
  };
  std::string version = kVersion;
  double duration_seconds = 0.0;

  void hash_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot read " + path);
    const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    config_hashes[path] = hex64(fnv1a64(body));
  }

  void hash_prompts(const PromptSet& prompts) {
    prompts.for_each([&](const char* name, const std::string& text) { prompt_hashes[name] = hex64(fnv1a64(text)); });
  }

  Json to_json() const {
    Json j;
    j["version"] = version;
    j["command_line"] = command_line;
    auto put = [&](const char* key, const auto& m) {
      j[key] = Json::object();
      for (const auto& [k, v] : m) j[key][k] = v;
    };
    put("config_hashes", config_hashes);
    put("prompt_hashes", prompt_hashes);
    put("seeds", seeds);
    put("endpoints", endpoints);
    put("artifacts", artifacts);
    put("artifact_versions", artifact_versions);
    j["duration_seconds"] = duration_seconds;
    return j;
  }

  /// Fields that do not vary between identical runs.
  Json reproducible_json() const {
    Json j = to_json();
    j.erase("duration_seconds");
    return j;
  }

  static std::string path_for(const std::string& output) { return output + ".manifest.json"; }

  void write_for(const std::string& output) const {
    std::ofstream out(path_for(output), std::ios::binary);
    if (!out) fail(Errc::io_error, "cannot write " + path_for(output));
    out << to_json().dump(2) << '\n';
  }
};

/// Measures wall-clock time from construction.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace mrag
