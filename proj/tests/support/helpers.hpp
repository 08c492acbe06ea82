#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "claid/feature_io.hpp"

namespace testing_support {

// Gaussian raw rows; rows of a grid differ in scale so L1 energies vary.
inline claid::FeatureGrid random_grid(std::uint32_t h, std::uint32_t w, std::uint32_t dim,
                                      std::uint64_t seed, std::uint32_t patch_px = 8) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  std::uniform_real_distribution<float> scale(0.5F, 2.0F);
  std::vector<float> raw(static_cast<std::size_t>(h) * w * dim);
  for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
    const float s = scale(gen);
    for (std::uint32_t k = 0; k < dim; ++k) raw[i * dim + k] = s * normal(gen);
  }
  return claid::FeatureGrid::from_raw(h, w, dim, patch_px, std::move(raw));
}

inline std::vector<std::vector<double>> random_unit_points(std::size_t n, std::size_t dim,
                                                           std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (auto& p : pts) {
    double sq = 0.0;
    for (auto& v : p) {
      v = normal(gen);
      sq += v * v;
    }
    for (auto& v : p) v /= std::sqrt(sq);
  }
  return pts;
}

inline std::vector<float> flatten(const std::vector<std::vector<double>>& pts) {
  std::vector<float> out;
  for (const auto& p : pts) {
    for (double v : p) out.push_back(static_cast<float>(v));
  }
  return out;
}

// Points as the library sees them: float storage widened back to double.
inline std::vector<std::vector<double>> widen(const std::vector<float>& flat, std::size_t dim) {
  std::vector<std::vector<double>> out(flat.size() / dim, std::vector<double>(dim));
  for (std::size_t i = 0; i < flat.size(); ++i) out[i / dim][i % dim] = flat[i];
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("claid-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
