#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mrag/core.hpp"
#include "mrag/embedding.hpp"
#include "mrag/error.hpp"
#include "mrag/rng.hpp"

namespace mrag::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mrag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Error code thrown by fn, or nullopt when it returns normally.
inline std::optional<Errc> errc_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& path, const std::string& body) {
  std::ofstream(path, std::ios::binary) << body;
}

inline Payload text(const std::string& s) { return Payload{TextSegment{s}}; }

inline ImageRef image(const std::string& uri) { return ImageRef{uri, std::nullopt, std::nullopt}; }

/// "w0 w1 ... w{n-1}": exactly n tokens.
inline std::string words(std::size_t n, const std::string& stem = "w") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += ' ';
    s += stem + std::to_string(i);
  }
  return s;
}

inline std::vector<double> gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

inline EmbeddingVector random_unit(Rng& rng, std::size_t dim) {
  auto v = gaussian(rng, dim);
  const double n = prefix_norm(v, dim);
  for (auto& x : v) x /= n;
  return EmbeddingVector(std::move(v));
}

}  // namespace mrag::test
