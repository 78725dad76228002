// Test-only helpers: random stores, temporary directories, file hashing.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "trajmap/ckptstore.hpp"

namespace trajmap::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("trajmap_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// FNV-1a 64 over the file contents.
inline std::uint64_t file_hash(const std::filesystem::path& p) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : file_bytes(p)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Hash of every regular file in a directory, in name order, excluding `skip`.
inline std::uint64_t directory_hash(const std::filesystem::path& dir, const std::string& skip = "run.json") {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != skip) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0;
  for (const auto& f : files) h = h * 1099511628211ull ^ file_hash(f) ^ std::hash<std::string>{}(f.filename().string());
  return h;
}

/// One F64 tensor "theta" per point.
inline TrajectoryStore store_from_points(const std::vector<std::vector<double>>& points) {
  std::vector<Checkpoint> cks;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Checkpoint c;
    c.index = static_cast<std::int64_t>(i);
    c.label = "p" + std::to_string(i);
    c.tensors.push_back(TensorRecord::f64("theta", {points[i].size()}, points[i]));
    cks.push_back(std::move(c));
  }
  return TrajectoryStore::from_checkpoints(std::move(cks));
}

inline std::vector<std::vector<double>> random_points(std::mt19937_64& rng, std::size_t n, std::size_t p,
                                                      double offset = 0.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(p));
  for (auto& v : pts) {
    for (auto& x : v) x = normal(rng) + offset;
  }
  return pts;
}

/// Random multi-tensor store (weights + bias per layer) with mixed dtypes.
inline std::vector<Checkpoint> random_checkpoints(std::mt19937_64& rng, std::size_t n, std::size_t p_target) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t rows = std::max<std::size_t>(1, p_target / 16);
  std::vector<Checkpoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    Checkpoint c;
    c.index = static_cast<std::int64_t>(i);
    c.label = "epoch " + std::to_string(i);
    std::vector<double> w(rows * 15);
    for (auto& x : w) x = normal(rng);
    std::vector<float> b(rows);
    for (auto& x : b) x = static_cast<float>(normal(rng));
    c.tensors.push_back(TensorRecord::f64("layer.0.weight", {rows, 15}, std::move(w)));
    c.tensors.push_back(TensorRecord::f32("layer.0.bias", {rows}, std::move(b)));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace trajmap::testing
